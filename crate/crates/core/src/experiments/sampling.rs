use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::min_separation;
use crate::error::{Error, Result};
use crate::matrixops::{complex_gaussian, CMatrix};

pub const MAX_REJECTIONS: usize = 100_000;
const MAX_WHITENING_ATTEMPTS: usize = 10;

/// Independent stream for one trial: the seed picks the key and the
/// `(sweep index, trial index)` pair picks the stream.
pub fn trial_rng(seed: u64, sweep_idx: usize, trial_idx: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((sweep_idx as u64) << 32) | trial_idx as u64);
    rng
}

/// Uniform positions on the torus, redrawn until every pairwise wrap-around
/// distance is at least `delta`; returned sorted.
pub fn sample_separated_spikes<R: Rng + ?Sized>(k: usize, delta: f64, rng: &mut R) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("separation must be non-negative, got {delta}")));
    }
    if k as f64 * delta >= 1.0 {
        return Err(Error::Infeasible(format!(
            "{k} spikes cannot be {delta}-separated on the unit torus"
        )));
    }
    for _ in 0..MAX_REJECTIONS {
        let mut tau: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        if k == 1 || min_separation(&tau) >= delta {
            tau.sort_by(|a, b| a.total_cmp(b));
            return Ok(tau);
        }
    }
    Err(Error::SamplingTimeout(MAX_REJECTIONS))
}

/// Complex Gaussian `K × L` amplitudes normalised so that `XX* = L·I`.
pub fn sample_whitened_amplitudes<R: Rng + ?Sized>(k: usize, l: usize, rng: &mut R) -> Result<CMatrix> {
    if k == 0 || l < k {
        return Err(Error::InvalidArgument(format!("whitening needs 1 <= K <= L, got K = {k}, L = {l}")));
    }
    for _ in 0..MAX_WHITENING_ATTEMPTS {
        let x = complex_gaussian(k, l, rng);
        let gram = &x * x.adjoint();
        let eig = SymmetricEigen::new(gram);
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        if !(lmin > 1e-10 * lmax) {
            continue;
        }
        let v = &eig.eigenvectors;
        let inv_sqrt = CMatrix::from_diagonal(
            &eig.eigenvalues.map(|e| Complex64::new((l as f64 / e).sqrt(), 0.0)),
        );
        return Ok(v * inv_sqrt * v.adjoint() * x);
    }
    Err(Error::Degenerate(format!(
        "amplitude draw rank-deficient in {MAX_WHITENING_ATTEMPTS} attempts"
    )))
}
