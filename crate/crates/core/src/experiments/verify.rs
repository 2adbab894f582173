use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{empirical_psi, wrapped_offset, SolverConfig};
use crate::matrixops::{complex_gaussian, iota, iota_inverse, unit_frobenius, CMatrix};
use crate::model::{ProblemInstance, PsfSpec};
use crate::sensitivity::{grad_gamma_q_zero, grad_q, grad_z_q_zero, jacobian_psi_zero, loss};

use super::sampling::sample_separated_spikes;

const FD_TOL: f64 = 1e-5;
const ORDER_MIN: f64 = 1.8;
const EXPANSION_EPS: [f64; 3] = [1e-3, 1e-4, 1e-5];
const EXPANSION_DIRECTIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub psf: PsfSpec,
    pub seed: u64,
    /// Finite-difference step, in location units and in noise units.
    pub fd_step: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { n: 64, k: 2, l: 3, psf: PsfSpec::Dirac, seed: 7, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Relative error for finite-difference checks, fitted order for the
    /// expansion check.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub tau: Vec<f64>,
    pub checks: Vec<CheckResult>,
    pub expansion_order: f64,
    pub passed: bool,
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let relation = if c.name == "expansion_order" { ">=" } else { "<=" };
            writeln!(
                f,
                "{} {:<18} {:.3e} (need {relation} {:.1e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            )?;
        }
        write!(f, "{}", if self.passed { "all checks passed" } else { "verification failed" })
    }
}

fn rel_error(fd: &DMatrix<f64>, exact: &DMatrix<f64>) -> f64 {
    let scale = exact.norm();
    let diff = (fd - exact).norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn fd_check(name: &str, fd: &DMatrix<f64>, exact: &DMatrix<f64>) -> CheckResult {
    let value = rel_error(fd, exact);
    CheckResult { name: name.into(), value, tolerance: FD_TOL, passed: value <= FD_TOL }
}

fn shifted(gamma: &[f64], k: usize, h: f64) -> Vec<f64> {
    let mut g = gamma.to_vec();
    g[k] += h;
    g
}

/// Least-squares slope of `log r` against `log ε` for the first-order
/// remainder `r(ε) = ‖ψ(εZ) − τ − ε ∇ψ(0) ι(Z)‖` along direction `z`.
pub fn expansion_order(
    instance: &ProblemInstance,
    jacobian: &DMatrix<f64>,
    z: &CMatrix,
    eps: &[f64],
    config: &SolverConfig,
) -> Result<f64> {
    if eps.len() < 2 {
        return Err(Error::InvalidArgument("need at least two step sizes".into()));
    }
    let linear = jacobian * iota(z);
    let mut points = Vec::with_capacity(eps.len());
    for &e in eps {
        let psi = empirical_psi(instance, &(z * Complex64::new(e, 0.0)), config)?;
        let offset = DVector::from_vec(wrapped_offset(&psi, instance.tau()));
        let r = (offset - &linear * e).norm();
        if !(r > 0.0) {
            return Err(Error::Numerical(format!("remainder vanished at ε = {e:e}")));
        }
        points.push((e.ln(), r.ln()));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Finite-difference checks of the location gradient, its zero-noise
/// derivatives in the locations and in the noise, and the order of the
/// first-order expansion of `ψ`, on a random instance.
pub fn verify_jacobian(config: &VerifyConfig) -> Result<VerifyReport> {
    let (n, k, l) = (config.n, config.k, config.l);
    if k == 0 || l == 0 || n <= 2 * k {
        return Err(Error::InvalidArgument(format!("need K, L >= 1 and N > 2K, got N = {n}, K = {k}, L = {l}")));
    }
    let h = config.fd_step;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("fd step must be positive, got {h}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let delta = (0.5 / k as f64).min(10.0 / n as f64);
    let tau = sample_separated_spikes(k, delta, &mut rng)?;
    let x = complex_gaussian(k, l, &mut rng);
    let instance = ProblemInstance::new(n, config.psf.clone(), tau.clone(), x)?;
    let mut checks = Vec::new();

    // gradient against the loss, away from the minimiser and with noise
    let z = unit_frobenius(n, l, &mut rng) * Complex64::new(0.05 * instance.signal().norm(), 0.0);
    let gamma: Vec<f64> = tau.iter().map(|t| t + 0.2 / n as f64).collect();
    let exact = DMatrix::from_row_slice(1, k, &grad_q(&instance, &gamma, &z)?);
    let mut fd = DMatrix::zeros(1, k);
    for kk in 0..k {
        fd[(0, kk)] = (loss(&instance, &shifted(&gamma, kk, h), &z)? - loss(&instance, &shifted(&gamma, kk, -h), &z)?)
            / (2.0 * h);
    }
    checks.push(fd_check("grad_q", &fd, &exact));

    let zero = CMatrix::zeros(n, l);
    let exact = grad_gamma_q_zero(&instance)?;
    let mut fd = DMatrix::zeros(k, k);
    for j in 0..k {
        let plus = grad_q(&instance, &shifted(&tau, j, h), &zero)?;
        let minus = grad_q(&instance, &shifted(&tau, j, -h), &zero)?;
        for i in 0..k {
            fd[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    checks.push(fd_check("grad_gamma_q_zero", &fd, &exact));

    let exact = grad_z_q_zero(&instance)?;
    let dim = 2 * n * l;
    let mut fd = DMatrix::zeros(k, dim);
    for col in 0..dim {
        let mut e = DVector::zeros(dim);
        e[col] = h;
        let dz = iota_inverse(&e, n, l)?;
        let plus = grad_q(&instance, &tau, &dz)?;
        let minus = grad_q(&instance, &tau, &(-dz))?;
        for i in 0..k {
            fd[(i, col)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    checks.push(fd_check("grad_z_q_zero", &fd, &exact));

    let jac = jacobian_psi_zero(&instance)?;
    let solver = SolverConfig::working_precision();
    let mut order = f64::INFINITY;
    for _ in 0..EXPANSION_DIRECTIONS {
        let dir = unit_frobenius(n, l, &mut rng);
        order = order.min(expansion_order(&instance, &jac.jacobian_psi, &dir, &EXPANSION_EPS, &solver)?);
    }
    checks.push(CheckResult {
        name: "expansion_order".into(),
        value: order,
        tolerance: ORDER_MIN,
        passed: order >= ORDER_MIN,
    });

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { config: config.clone(), tau, checks, expansion_order: order, passed })
}
