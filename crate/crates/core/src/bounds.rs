//! Scalar characteristics of the PSF and of the amplitudes, and the
//! interpretable upper bounds built from them.
//!
//! `E₀` and `E₁` are continuous `L₂` energies of `ĝ` and `ĝ′(f) = j2πf ĝ(f)`
//! over the band `J_N = [−(N−1)/2, (N−1)/2]`. The flatness `ρ` is the larger
//! of the normalised total variations of `|ĝ|² 𝟙_{J_N}` and `|ĝ′|² 𝟙_{J_N}`;
//! the band-edge jumps of the truncated densities are part of the variation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixops::{norm_inf_to_2, spectral_norm, CMatrix};
use crate::model::{psf_spectrum, PsfSpec};

/// Samples per unit frequency on the first quadrature pass.
pub const DEFAULT_OVERSAMPLING: usize = 16;
/// Relative change between successive refinements at which integration stops.
pub const REFINE_TOL: f64 = 1e-8;
const MAX_NODES: usize = 1 << 23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralCharacteristics {
    pub e0: f64,
    pub e1: f64,
    pub rho: f64,
    pub n: usize,
}

impl SpectralCharacteristics {
    pub fn compute(psf: &PsfSpec, n: usize) -> Result<Self> {
        let (e0, e1) = band_energies(psf, n)?;
        let rho = flatness_rho(psf, n)?;
        Ok(Self { e0, e1, rho, n })
    }

    /// Half-width of `J_N`.
    pub fn half_band(&self) -> f64 {
        (self.n as f64 - 1.0) / 2.0
    }
}

fn check_band(psf: &PsfSpec, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("band J_N has zero length for N = {n}")));
    }
    psf.validate_for(n)?;
    Ok((n as f64 - 1.0) / 2.0)
}

/// Quadrature nodes: a uniform grid with `per_unit` samples per unit frequency,
/// merged with any tabulation knots inside the band.
fn nodes(psf: &PsfSpec, half: f64, per_unit: usize) -> Result<Vec<f64>> {
    let intervals = ((2.0 * half) * per_unit as f64).ceil() as usize;
    if intervals + 1 > MAX_NODES {
        return Err(Error::Numerical(format!(
            "quadrature refinement exceeded {MAX_NODES} nodes without converging"
        )));
    }
    let step = 2.0 * half / intervals as f64;
    let mut out: Vec<f64> = (0..=intervals).map(|i| -half + step * i as f64).collect();
    out[intervals] = half;
    if let PsfSpec::Tabulated { freqs, .. } = psf {
        out.extend(freqs.iter().cloned().filter(|f| f.abs() < half));
        out.sort_by(|a, b| a.total_cmp(b));
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * half.max(1.0));
    }
    Ok(out)
}

/// `(|ĝ(f)|², |ĝ′(f)|²)` at each node.
fn densities(psf: &PsfSpec, nodes: &[f64]) -> Result<Vec<(f64, f64)>> {
    nodes
        .iter()
        .map(|&f| {
            let p = psf_spectrum(psf, f)?.norm_sqr();
            Ok((p, (2.0 * PI * f).powi(2) * p))
        })
        .collect()
}

fn rel_change(new: f64, old: f64) -> f64 {
    if new == old {
        0.0
    } else {
        (new - old).abs() / new.abs().max(old.abs())
    }
}

/// Runs `eval(per_unit)` with doubling sampling density until both returned
/// quantities change by less than [`REFINE_TOL`].
fn refine<F>(oversampling: usize, mut eval: F) -> Result<(f64, f64)>
where
    F: FnMut(usize) -> Result<(f64, f64)>,
{
    if oversampling == 0 {
        return Err(Error::InvalidArgument("oversampling must be positive".into()));
    }
    let mut per_unit = oversampling;
    let mut prev = eval(per_unit)?;
    loop {
        per_unit *= 2;
        let next = eval(per_unit)?;
        if rel_change(next.0, prev.0) < REFINE_TOL && rel_change(next.1, prev.1) < REFINE_TOL {
            return Ok(next);
        }
        prev = next;
    }
}

/// `(E₀, E₁)` by refined trapezoid quadrature starting at `oversampling`
/// samples per unit frequency.
pub fn band_energies_quadrature(psf: &PsfSpec, n: usize, oversampling: usize) -> Result<(f64, f64)> {
    let half = check_band(psf, n)?;
    refine(oversampling, |per_unit| {
        let f = nodes(psf, half, per_unit)?;
        let d = densities(psf, &f)?;
        let mut e0 = 0.0;
        let mut e1 = 0.0;
        for i in 1..f.len() {
            let h = f[i] - f[i - 1];
            e0 += 0.5 * h * (d[i].0 + d[i - 1].0);
            e1 += 0.5 * h * (d[i].1 + d[i - 1].1);
        }
        Ok((e0, e1))
    })
}

/// Band-limited energies of the PSF and of its derivative.
pub fn band_energies(psf: &PsfSpec, n: usize) -> Result<(f64, f64)> {
    match psf {
        PsfSpec::Dirac => {
            let width = check_band(psf, n)? * 2.0;
            Ok((width, PI * PI * width.powi(3) / 3.0))
        }
        _ => band_energies_quadrature(psf, n, DEFAULT_OVERSAMPLING),
    }
}

/// Total variations of `|ĝ|² 𝟙_{J_N}` and `|ĝ′|² 𝟙_{J_N}`, including both
/// band-edge jumps.
pub fn total_variations(psf: &PsfSpec, n: usize, oversampling: usize) -> Result<(f64, f64)> {
    let half = check_band(psf, n)?;
    refine(oversampling, |per_unit| {
        let f = nodes(psf, half, per_unit)?;
        let d = densities(psf, &f)?;
        let last = d.len() - 1;
        let mut tv0 = d[0].0.abs() + d[last].0.abs();
        let mut tv1 = d[0].1.abs() + d[last].1.abs();
        for w in d.windows(2) {
            tv0 += (w[1].0 - w[0].0).abs();
            tv1 += (w[1].1 - w[0].1).abs();
        }
        Ok((tv0, tv1))
    })
}

pub fn flatness_rho_with(psf: &PsfSpec, n: usize, oversampling: usize) -> Result<f64> {
    let (e0, e1) = band_energies(psf, n)?;
    if !(e0 > 0.0 && e1 > 0.0) {
        return Err(Error::Domain(format!(
            "spectrum vanishes on the band (E0 = {e0}, E1 = {e1})"
        )));
    }
    let (tv0, tv1) = total_variations(psf, n, oversampling)?;
    Ok((tv0 / e0).max(tv1 / e1))
}

/// Spectral flatness `ρ`.
pub fn flatness_rho(psf: &PsfSpec, n: usize) -> Result<f64> {
    flatness_rho_with(psf, n, DEFAULT_OVERSAMPLING)
}

/// Dynamic-range statistics of the amplitude matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeStats {
    pub kappa: f64,
    pub eta: f64,
    /// `min diag(XX*)`
    pub min_diag: f64,
    /// `‖X‖`
    pub x_spectral: f64,
    /// `‖X‖_F`
    pub x_frob: f64,
    /// `‖XX*‖_{∞→2}`
    pub inf_to_2: f64,
}

pub fn amplitude_stats(x: &CMatrix) -> Result<AmplitudeStats> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("empty amplitude matrix".into()));
    }
    let gram = x * x.adjoint();
    let min_diag = (0..gram.nrows()).map(|k| gram[(k, k)].re).fold(f64::INFINITY, f64::min);
    if !(min_diag > 0.0) {
        return Err(Error::Degenerate("amplitude matrix has a zero row".into()));
    }
    let inf_to_2 = norm_inf_to_2(&gram);
    let x_spectral = spectral_norm(x)?;
    let x_frob = x.norm();
    Ok(AmplitudeStats {
        kappa: inf_to_2 / min_diag,
        eta: x_spectral * x_frob / min_diag,
        min_diag,
        x_spectral,
        x_frob,
        inf_to_2,
    })
}

/// Smallest wrap-around distance between locations on the unit torus; `1`
/// for a single spike.
pub fn min_separation(tau: &[f64]) -> f64 {
    let mut best = 1.0_f64;
    for (i, a) in tau.iter().enumerate() {
        for b in &tau[i + 1..] {
            let d = (a - b).rem_euclid(1.0);
            best = best.min(d.min(1.0 - d));
        }
    }
    best
}

/// Separation above which Theorem-type bounds are finite: `(2/3) ρ κ`.
pub fn separation_threshold(rho: f64, kappa: f64) -> f64 {
    2.0 / 3.0 * rho * kappa
}

fn require_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("separation must be positive, got {delta}")))
    }
}

fn require_regime(delta: f64, threshold: f64) -> Result<()> {
    require_delta(delta)?;
    if delta > threshold {
        Ok(())
    } else {
        Err(Error::Precondition { delta, threshold })
    }
}

/// Upper bound on `‖∇_{ι(Z)} ψ(0)‖`, valid for `Δ > (2/3) ρ κ`.
pub fn theorem1_bound(chars: &SpectralCharacteristics, stats: &AmplitudeStats, delta: f64) -> Result<f64> {
    let threshold = separation_threshold(chars.rho, stats.kappa);
    require_regime(delta, threshold)?;
    let r = chars.rho / delta;
    Ok(stats.x_spectral * (1.0 + 2.0 / 3.0 * r).sqrt()
        / (chars.e1.sqrt() * stats.min_diag * (1.0 - 2.0 / 3.0 * r * stats.kappa)))
}

/// Upper bound on `σ_max(G Φ_τ)` for any `Δ > 0`.
pub fn lemma2_sigma_max_bound(e0: f64, rho: f64, delta: f64) -> Result<f64> {
    require_delta(delta)?;
    Ok((e0 * (1.0 + 0.5 * rho / delta)).sqrt())
}

/// Upper bound on the noise propagation factor `‖∇ψ(0)‖ · ‖GΦ_τX‖_F`.
pub fn corollary_npf_bound(
    chars: &SpectralCharacteristics,
    stats: &AmplitudeStats,
    delta: f64,
) -> Result<f64> {
    let threshold = separation_threshold(chars.rho, stats.kappa);
    require_regime(delta, threshold)?;
    let r = chars.rho / delta;
    let alpha = (chars.e1 / chars.e0).sqrt();
    Ok(stats.eta * ((1.0 + 2.0 / 3.0 * r) * (1.0 + 0.5 * r)).sqrt()
        / (alpha * (1.0 - 2.0 / 3.0 * r * stats.kappa)))
}

/// Upper bound on `‖S − E₁ I_K‖`, valid for `Δ > (2/3) ρ`.
pub fn lemma3_s_bound(e1: f64, rho: f64, delta: f64) -> Result<f64> {
    require_regime(delta, 2.0 / 3.0 * rho)?;
    Ok(2.0 / 3.0 * e1 * rho / delta)
}

/// `(E₁(1 − ρ/Δ), E₁(1 + ρ/Δ))`, read as `λ_min(M) ≥ lo` and `λ_max(M) ≤ hi`.
/// A negative `lo` is vacuous rather than an error.
pub fn lemma4_m_eigen_bounds(e1: f64, rho: f64, delta: f64) -> Result<(f64, f64)> {
    require_delta(delta)?;
    let r = rho / delta;
    Ok((e1 * (1.0 - r), e1 * (1.0 + r)))
}

/// Every bound evaluated at one separation, with the inapplicable ones left
/// empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub delta: f64,
    /// `(2/3) ρ κ`
    pub threshold: f64,
    pub precondition_ok: bool,
    pub theorem1: Option<f64>,
    pub corollary_npf: Option<f64>,
    pub lemma2_sigma_max: f64,
    pub lemma3_s_distance: Option<f64>,
    pub lemma4_lambda_lo: f64,
    pub lemma4_lambda_hi: f64,
    pub lemma4_lo_vacuous: bool,
}

fn applicable(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Precondition { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn bound_report(chars: &SpectralCharacteristics, stats: &AmplitudeStats, delta: f64) -> Result<BoundReport> {
    let threshold = separation_threshold(chars.rho, stats.kappa);
    let (lo, hi) = lemma4_m_eigen_bounds(chars.e1, chars.rho, delta)?;
    Ok(BoundReport {
        delta,
        threshold,
        precondition_ok: delta > threshold,
        theorem1: applicable(theorem1_bound(chars, stats, delta))?,
        corollary_npf: applicable(corollary_npf_bound(chars, stats, delta))?,
        lemma2_sigma_max: lemma2_sigma_max_bound(chars.e0, chars.rho, delta)?,
        lemma3_s_distance: applicable(lemma3_s_bound(chars.e1, chars.rho, delta))?,
        lemma4_lambda_lo: lo,
        lemma4_lambda_hi: hi,
        lemma4_lo_vacuous: lo <= 0.0,
    })
}
