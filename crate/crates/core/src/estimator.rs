//! Local variable-projection solver on the torus, used to evaluate the
//! inverse map `ψ(Z)` numerically near `Z = 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::min_separation;
use crate::error::{Error, Result};
use crate::matrixops::{iota_inverse, unit_frobenius, CMatrix};
use crate::model::{synthesize, ProblemInstance};
use crate::sensitivity::varpro_terms;

/// Locations closer than this are treated as merged.
pub const MERGE_TOL: f64 = 1e-9;
/// Gauss–Newton steps at or below this length are under the resolution of
/// a location stored in `[0, 1)`.
pub const STEP_FLOOR: f64 = 4.0 * f64::EPSILON;
/// Safety factor on the rounding error of the computed loss.
const LOSS_ROUNDING: f64 = 1024.0 * f64::EPSILON;

/// Rounding error of `‖P⊥Y‖²` computed by cancellation from `Y`.
fn loss_resolution(loss: f64, y_norm: f64) -> f64 {
    LOSS_ROUNDING * (y_norm * loss.sqrt() + loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖q‖_∞` falls to this level.
    pub grad_tol: f64,
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-10,
            step_init: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
        }
    }
}

impl SolverConfig {
    /// Iterates until the Gauss–Newton step reaches [`STEP_FLOOR`] rather
    /// than stopping on a gradient level.
    pub fn working_precision() -> Self {
        Self { grad_tol: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "backtrack_factor must lie in (0, 1), got {}",
                self.backtrack_factor
            )));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidArgument(format!("armijo_c must lie in (0, 1), got {}", self.armijo_c)));
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return Err(Error::InvalidArgument("step_init must be positive".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidArgument("grad_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Estimated locations in `[0, 1)`.
    pub gamma_hat: Vec<f64>,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub converged: bool,
    /// The gradient tolerance was not met, but the Gauss–Newton step had
    /// shrunk to [`STEP_FLOOR`]: the iterate is stationary to working precision.
    pub precision_limited: bool,
    pub final_loss: f64,
}

impl SolveResult {
    /// Converged, or stationary to working precision.
    pub fn is_stationary(&self) -> bool {
        self.converged || self.precision_limited
    }
}

fn wrap(gamma: &[f64]) -> Vec<f64> {
    gamma.iter().map(|g| g.rem_euclid(1.0)).collect()
}

/// Signed per-coordinate offset `γ − τ` reduced to `[−1/2, 1/2)`.
pub fn wrapped_offset(gamma: &[f64], tau: &[f64]) -> Vec<f64> {
    gamma
        .iter()
        .zip(tau)
        .map(|(g, t)| (g - t + 0.5).rem_euclid(1.0) - 0.5)
        .collect()
}

/// Euclidean norm of [`wrapped_offset`].
pub fn wrapped_distance(gamma: &[f64], tau: &[f64]) -> f64 {
    wrapped_offset(gamma, tau).iter().map(|d| d * d).sum::<f64>().sqrt()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_merge(gamma: &[f64]) -> Result<()> {
    if gamma.len() > 1 && min_separation(gamma) < MERGE_TOL {
        Err(Error::Degenerate(format!(
            "locations merged during descent (separation {:e})",
            min_separation(gamma)
        )))
    } else {
        Ok(())
    }
}

/// Minimises `‖P⊥_γ Y‖²_F` locally from `gamma0`.
///
/// Steps along the Gauss–Newton direction when the curvature is positive
/// definite and along the negative gradient otherwise, with Armijo
/// backtracking. Once the predicted decrease drops below the resolution of
/// the computed loss, a step is accepted if it reduces `‖q‖_∞` instead.
/// Running out of iterations is reported through
/// `converged = false`, not as an error.
pub fn solve_varpro(
    instance: &ProblemInstance,
    y: &CMatrix,
    gamma0: &[f64],
    config: &SolverConfig,
) -> Result<SolveResult> {
    config.validate()?;
    if gamma0.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidArgument("gamma0 must be finite".into()));
    }
    let mut gamma = wrap(gamma0);
    check_merge(&gamma)?;
    let mut terms = varpro_terms(instance, &gamma, y)?;
    let y_norm = y.norm();
    let mut iterations = 0;
    let mut precision_limited = false;

    while iterations < config.max_iters && inf_norm(&terms.grad) > config.grad_tol {
        let g = DVector::from_column_slice(&terms.grad);
        let newton = terms
            .curvature
            .clone()
            .cholesky()
            .map(|ch| -ch.solve(&g))
            .filter(|d| d.iter().all(|v| v.is_finite()) && d.dot(&g) < 0.0);
        if let Some(d) = &newton {
            if d.amax() <= STEP_FLOOR {
                precision_limited = true;
                break;
            }
        }
        let direction = newton.unwrap_or_else(|| -g.clone());
        let slope = direction.dot(&g);

        let mut t = config.step_init;
        let mut accepted = None;
        while t > 1e-20 {
            let trial: Vec<f64> = gamma.iter().zip(direction.iter()).map(|(a, d)| a + t * d).collect();
            let trial = wrap(&trial);
            check_merge(&trial)?;
            if let Ok(next) = varpro_terms(instance, &trial, y) {
                let armijo = next.loss <= terms.loss + config.armijo_c * t * slope;
                // a decrease this small is invisible in the loss, so fall back to the gradient
                let resolution = loss_resolution(terms.loss, y_norm);
                let unresolved = (t * slope).abs() <= resolution
                    && next.loss <= terms.loss + resolution
                    && inf_norm(&next.grad) < inf_norm(&terms.grad);
                if armijo || unresolved {
                    accepted = Some((trial, next));
                    break;
                }
            }
            t *= config.backtrack_factor;
        }
        let Some((next_gamma, next_terms)) = accepted else {
            // no representable decrease left along the search direction
            break;
        };
        debug_assert!(next_terms.loss <= terms.loss + loss_resolution(terms.loss, y_norm));
        gamma = next_gamma;
        terms = next_terms;
        iterations += 1;
    }

    let final_grad_norm = inf_norm(&terms.grad);
    let converged = final_grad_norm <= config.grad_tol;
    Ok(SolveResult {
        gamma_hat: gamma,
        iterations,
        final_grad_norm,
        converged,
        precision_limited: precision_limited && !converged,
        final_loss: terms.loss,
    })
}

/// `ψ(Z)`: the solver started at the ground truth on `G Φ_τ X + Z`.
pub fn empirical_psi(instance: &ProblemInstance, z: &CMatrix, config: &SolverConfig) -> Result<Vec<f64>> {
    let y = synthesize(instance, z)?;
    let res = solve_varpro(instance, &y, instance.tau(), config)?;
    if !res.is_stationary() {
        return Err(Error::Numerical(format!(
            "solver stopped after {} iterations with ‖q‖∞ = {:e}",
            res.iterations, res.final_grad_norm
        )));
    }
    Ok(res.gamma_hat)
}

/// Central finite-difference Jacobian of `ψ` at zero noise in `ι`
/// coordinates, with step `h`.
pub fn finite_difference_psi_jacobian(
    instance: &ProblemInstance,
    h: f64,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    let (n, l, k) = (instance.n(), instance.l(), instance.k());
    let dim = 2 * n * l;
    let mut jac = DMatrix::zeros(k, dim);
    for col in 0..dim {
        let mut e = DVector::zeros(dim);
        e[col] = h;
        let zp = iota_inverse(&e, n, l)?;
        let zm = -zp.clone();
        let plus = empirical_psi(instance, &zp, config)?;
        let minus = empirical_psi(instance, &zm, config)?;
        let diff = wrapped_offset(&plus, &minus);
        for kk in 0..k {
            jac[(kk, col)] = diff[kk] / (2.0 * h);
        }
    }
    Ok(jac)
}

fn quotient(instance: &ProblemInstance, z1: &CMatrix, z2: &CMatrix, config: &SolverConfig) -> Result<f64> {
    let a = empirical_psi(instance, z1, config)?;
    let b = empirical_psi(instance, z2, config)?;
    let dz = (z1 - z2).norm();
    Ok(wrapped_distance(&a, &b) / dz)
}

/// Lower estimate of the local Lipschitz constant of `ψ` on the Frobenius
/// ball of the given radius.
///
/// Takes the largest difference quotient over `trials` random pairs on the
/// sphere of that radius, plus one antipodal pair `±radius·v` where `v` is the
/// top right-singular direction of a finite-difference Jacobian of `ψ` built
/// from solver calls alone. Pairs whose solves fail are skipped.
/// Radii up to about `1e−4 · ‖GΦX‖_F` keep the solves in the small-noise
/// regime.
pub fn empirical_lipschitz_probe(instance: &ProblemInstance, radius: f64, trials: usize, seed: u64) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let config = SolverConfig::default();
    let (n, l) = (instance.n(), instance.l());
    let radius_c = Complex64::new(radius, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<f64> = None;
    let mut failures = 0usize;
    let mut record = |r: Result<f64>| match r {
        Ok(v) => best = Some(best.map_or(v, |b: f64| b.max(v))),
        Err(e) => {
            failures += 1;
            log::debug!("lipschitz probe pair skipped: {e}");
        }
    };

    for _ in 0..trials {
        let z1 = unit_frobenius(n, l, &mut rng) * radius_c;
        let z2 = unit_frobenius(n, l, &mut rng) * radius_c;
        record(quotient(instance, &z1, &z2, &config));
    }

    let directed = finite_difference_psi_jacobian(instance, radius, &config).and_then(|jac| {
        let eig = SymmetricEigen::new(&jac * jac.transpose());
        let (imax, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::Numerical("empty Jacobian".into()))?;
        let v = jac.transpose() * eig.eigenvectors.column(imax);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::Degenerate("finite-difference Jacobian vanishes".into()));
        }
        let z1 = iota_inverse(&(v * (radius / norm)), n, l)?;
        let z2 = -z1.clone();
        quotient(instance, &z1, &z2, &config)
    });
    record(directed);

    best.ok_or_else(|| Error::Numerical(format!("all {failures} probe pairs failed")))
}
