use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{amplitude_stats, corollary_npf_bound, lemma3_s_bound, min_separation, SpectralCharacteristics};
use crate::error::{Error, Result};
use crate::matrixops::{spectral_norm, CMatrix};
use crate::model::{ProblemInstance, PsfSpec};
use crate::sensitivity::{noise_propagation_factor, schur_matrices};
use num_complex::Complex64;

use super::sampling::{sample_separated_spikes, sample_whitened_amplitudes, trial_rng};

/// Caps the number of worker threads used for trials.
pub const THREADS_ENV: &str = "SPIKE_SENS_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sweep {
    Delta { deltas: Vec<f64> },
    /// Gaussian widths at one fixed separation.
    Sigma { sigmas: Vec<f64>, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// PSF of a separation sweep; a width sweep only checks that it is Gaussian.
    pub psf: PsfSpec,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub trials: usize,
    pub seed: u64,
    pub sweep: Sweep,
}

impl SweepConfig {
    /// Defaults: `N = 501`, `K = L = 3`, 50 trials.
    pub fn new(psf: PsfSpec, sweep: Sweep, seed: u64) -> Self {
        Self { psf, n: 501, k: 3, l: 3, trials: 50, seed, sweep }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l < self.k {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= K <= L, got K = {}, L = {}",
                self.k, self.l
            )));
        }
        if self.n <= 2 * self.k {
            return Err(Error::InvalidArgument(format!("need N > 2K, got N = {}, K = {}", self.n, self.k)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        let positive = |v: &[f64]| !v.is_empty() && v.iter().all(|x| *x > 0.0 && x.is_finite());
        match &self.sweep {
            Sweep::Delta { deltas } => {
                if !positive(deltas) {
                    return Err(Error::InvalidArgument("separations must be a non-empty list of positive values".into()));
                }
            }
            Sweep::Sigma { sigmas, delta } => {
                if !positive(sigmas) || !positive(&[*delta]) {
                    return Err(Error::InvalidArgument("widths and separation must be positive".into()));
                }
                if !matches!(self.psf, PsfSpec::Gaussian { .. }) {
                    return Err(Error::InvalidArgument("a width sweep needs the Gaussian family".into()));
                }
            }
        }
        for delta in self.deltas() {
            if self.k as f64 * delta >= 1.0 {
                return Err(Error::Infeasible(format!(
                    "{} spikes cannot be {delta}-separated on the unit torus",
                    self.k
                )));
            }
        }
        Ok(())
    }

    fn deltas(&self) -> Vec<f64> {
        match &self.sweep {
            Sweep::Delta { deltas } => deltas.clone(),
            Sweep::Sigma { delta, .. } => vec![*delta],
        }
    }
}

/// One row of sweep output. Empirical fields are maxima over the
/// `trials_used` trials that completed; `None` marks a vacuous bound, or an
/// empirical field when no trial completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep_value: f64,
    pub n_delta: f64,
    pub empirical_s_dist: Option<f64>,
    pub empirical_m_dist: Option<f64>,
    pub empirical_npf: Option<f64>,
    pub bound_lemma3: Option<f64>,
    pub bound_corollary: Option<f64>,
    pub trials_used: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub tau_separation: f64,
    /// `‖S − E₁I‖`
    pub s_dist: f64,
    /// `‖M − E₁I‖`
    pub m_dist: f64,
    pub npf: f64,
    pub bound_corollary: Option<f64>,
}

fn shifted_norm(a: &CMatrix, e1: f64) -> Result<f64> {
    let n = a.nrows();
    spectral_norm(&(a - CMatrix::identity(n, n) * Complex64::new(e1, 0.0)))
}

/// Draws one separated configuration with whitened amplitudes and measures it.
pub fn run_trial<R: Rng + ?Sized>(
    psf: &PsfSpec,
    chars: &SpectralCharacteristics,
    k: usize,
    l: usize,
    delta: f64,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let tau = sample_separated_spikes(k, delta, rng)?;
    let x = sample_whitened_amplitudes(k, l, rng)?;
    let tau_separation = min_separation(&tau);
    assert!(tau_separation >= delta, "sampled separation {tau_separation} below {delta}");
    let stats = amplitude_stats(&x)?;
    let instance = ProblemInstance::new(chars.n, psf.clone(), tau, x)?;
    let schur = schur_matrices(&instance, chars.e0, chars.e1)?;
    let npf = noise_propagation_factor(&instance)?;
    let bound_corollary = match corollary_npf_bound(chars, &stats, delta) {
        Ok(b) => Some(b),
        Err(Error::Precondition { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(TrialOutcome {
        tau_separation,
        s_dist: shifted_norm(&schur.s, chars.e1)?,
        m_dist: shifted_norm(&schur.m, chars.e1)?,
        npf,
        bound_corollary,
    })
}

/// Trial failures that exclude the trial instead of aborting the sweep.
fn excludable(e: &Error) -> bool {
    matches!(e, Error::Degenerate(_) | Error::Rank(_) | Error::Numerical(_))
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let threads: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|t| *t > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))
}

fn max_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
}

#[allow(clippy::too_many_arguments)]
fn sweep_point(
    pool: &rayon::ThreadPool,
    psf: &PsfSpec,
    chars: &SpectralCharacteristics,
    config: &SweepConfig,
    sweep_idx: usize,
    sweep_value: f64,
    delta: f64,
) -> Result<SweepRecord> {
    let outcomes: Vec<Result<TrialOutcome>> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(psf, chars, config.k, config.l, delta, &mut trial_rng(config.seed, sweep_idx, t)))
            .collect()
    });
    let mut used = Vec::with_capacity(outcomes.len());
    for (t, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => used.push(o),
            Err(e) if excludable(&e) => log::warn!("sweep point {sweep_idx}, trial {t} excluded: {e}"),
            Err(e) => return Err(e),
        }
    }
    let bound_lemma3 = match lemma3_s_bound(chars.e1, chars.rho, delta) {
        Ok(b) => Some(b),
        Err(Error::Precondition { .. }) => None,
        Err(e) => return Err(e),
    };
    let bound_corollary = if used.is_empty() || used.iter().any(|o| o.bound_corollary.is_none()) {
        None
    } else {
        max_of(used.iter().filter_map(|o| o.bound_corollary))
    };
    Ok(SweepRecord {
        sweep_value,
        n_delta: config.n as f64 * delta,
        empirical_s_dist: max_of(used.iter().map(|o| o.s_dist)),
        empirical_m_dist: max_of(used.iter().map(|o| o.m_dist)),
        empirical_npf: max_of(used.iter().map(|o| o.npf)),
        bound_lemma3,
        bound_corollary,
        trials_used: used.len(),
        seed: config.seed,
    })
}

/// Worst case over `trials` draws at each separation of a [`Sweep::Delta`].
pub fn run_delta_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let Sweep::Delta { deltas } = &config.sweep else {
        return Err(Error::InvalidArgument("expected a separation sweep".into()));
    };
    let chars = SpectralCharacteristics::compute(&config.psf, config.n)?;
    let pool = thread_pool()?;
    deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| sweep_point(&pool, &config.psf, &chars, config, i, delta, delta))
        .collect()
}

/// Worst case over `trials` draws for each Gaussian width of a
/// [`Sweep::Sigma`].
pub fn run_sigma_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let Sweep::Sigma { sigmas, delta } = &config.sweep else {
        return Err(Error::InvalidArgument("expected a width sweep".into()));
    };
    let pool = thread_pool()?;
    sigmas
        .iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let psf = PsfSpec::gaussian(sigma)?;
            let chars = SpectralCharacteristics::compute(&psf, config.n)?;
            sweep_point(&pool, &psf, &chars, config, i, sigma, *delta)
        })
        .collect()
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    match config.sweep {
        Sweep::Delta { .. } => run_delta_sweep(config),
        Sweep::Sigma { .. } => run_sigma_sweep(config),
    }
}

/// 25 separations with `NΔ` log-spaced from 0.5 to 200, the top end clipped to
/// `0.9·N/K` so that rejection sampling stays cheap.
pub fn preset_deltas(n: usize, k: usize) -> Vec<f64> {
    let lo: f64 = 0.5;
    let hi = 200.0_f64.min(0.9 * n as f64 / k.max(1) as f64).max(lo);
    let points = 25;
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            (lo.ln() + t * (hi.ln() - lo.ln())).exp() / n as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(psf: PsfSpec, deltas: Vec<f64>, trials: usize, seed: u64) -> SweepConfig {
        SweepConfig { psf, n: 65, k: 2, l: 2, trials, seed, sweep: Sweep::Delta { deltas } }
    }

    #[test]
    fn preset_grid_shape() {
        let d = preset_deltas(501, 3);
        assert_eq!(d.len(), 25);
        assert!((d[0] * 501.0 - 0.5).abs() < 1e-12);
        assert!((d[24] * 501.0 - 150.3).abs() < 1e-9);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
        assert!(3.0 * d[24] < 1.0);
        let wide = preset_deltas(5001, 3);
        assert!((wide[24] * 5001.0 - 200.0).abs() < 1e-9);
    }

    #[test]
    fn records_are_consistent() {
        let cfg = small(PsfSpec::Dirac, vec![0.02, 0.1, 0.3], 6, 5);
        let recs = run_delta_sweep(&cfg).unwrap();
        assert_eq!(recs.len(), 3);
        for r in &recs {
            assert!(r.trials_used <= 6);
            assert!(r.empirical_s_dist.unwrap() >= 0.0);
            assert!(r.empirical_npf.unwrap() > 0.0);
            for b in [r.bound_lemma3, r.bound_corollary].into_iter().flatten() {
                assert!(b > 0.0);
            }
            assert!((r.n_delta - 65.0 * r.sweep_value).abs() < 1e-12);
        }
        // ρ = 12/64, so Lemma 3 needs Δ > 0.125 and the corollary needs the same with κ = 1
        assert!(recs[0].bound_lemma3.is_none() && recs[0].bound_corollary.is_none());
        assert!(recs[2].bound_lemma3.is_some() && recs[2].bound_corollary.is_some());
    }

    #[test]
    fn determinism_and_trial_monotonicity() {
        let a = run_delta_sweep(&small(PsfSpec::Dirac, vec![0.05, 0.2], 8, 3)).unwrap();
        let b = run_delta_sweep(&small(PsfSpec::Dirac, vec![0.05, 0.2], 8, 3)).unwrap();
        assert_eq!(a, b);
        let half = run_delta_sweep(&small(PsfSpec::Dirac, vec![0.05, 0.2], 4, 3)).unwrap();
        for (full, part) in a.iter().zip(&half) {
            assert!(full.empirical_npf >= part.empirical_npf);
            assert!(full.empirical_s_dist >= part.empirical_s_dist);
        }
        let other = run_delta_sweep(&small(PsfSpec::Dirac, vec![0.05, 0.2], 8, 4)).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn sigma_sweep_rows() {
        let cfg = SweepConfig {
            psf: PsfSpec::gaussian(0.01).unwrap(),
            n: 65,
            k: 2,
            l: 2,
            trials: 3,
            seed: 1,
            sweep: Sweep::Sigma { sigmas: vec![0.01, 0.02], delta: 0.3 },
        };
        let recs = run_sigma_sweep(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].sweep_value, 0.02);
        assert!((recs[0].n_delta - 19.5).abs() < 1e-12);
        let wrong_family = SweepConfig { psf: PsfSpec::Dirac, ..cfg };
        assert!(run_sigma_sweep(&wrong_family).is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(matches!(
            run_delta_sweep(&small(PsfSpec::Dirac, vec![0.6], 1, 1)),
            Err(Error::Infeasible(_))
        ));
        assert!(run_delta_sweep(&small(PsfSpec::Dirac, vec![], 1, 1)).is_err());
        assert!(run_delta_sweep(&small(PsfSpec::Dirac, vec![0.1], 0, 1)).is_err());
        let bad_l = SweepConfig { l: 1, ..small(PsfSpec::Dirac, vec![0.1], 1, 1) };
        assert!(run_delta_sweep(&bad_l).is_err());
    }
}
