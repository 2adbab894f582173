//! Measurement model: frequency grid, PSF spectra and the matrices entering
//! `Y = G Φ_τ X + Z`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixops::{scale_rows, CMatrix};

/// Point spread function, described through its Fourier spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PsfSpec {
    /// Flat spectrum, `ĝ ≡ 1`.
    Dirac,
    /// Unit-integral Gaussian kernel of width `sigma` (time units).
    Gaussian { sigma: f64 },
    /// Sampled spectrum, linearly interpolated between strictly increasing
    /// frequencies.
    Tabulated {
        freqs: Vec<f64>,
        values: Vec<Complex64>,
    },
}

impl PsfSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(PsfSpec::Gaussian { sigma })
    }

    pub fn tabulated(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "tabulated psf has {} frequencies but {} values",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.len() < 2 {
            return Err(Error::InvalidArgument(
                "tabulated psf needs at least two samples".into(),
            ));
        }
        if freqs.iter().any(|f| !f.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "tabulated psf contains non-finite entries".into(),
            ));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "tabulated psf frequencies must be strictly increasing".into(),
            ));
        }
        Ok(PsfSpec::Tabulated { freqs, values })
    }

    /// Reads a two- or three-column CSV `(f, re[, im])`. A non-numeric first
    /// row is treated as a header.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path.as_ref())?;
        let mut freqs = Vec::new();
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.iter().all(|c| c.is_empty()) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            let cells = match parsed {
                Ok(cells) => cells,
                Err(_) if row == 0 => continue,
                Err(e) => {
                    return Err(Error::InvalidArgument(format!(
                        "row {}: non-numeric cell ({e})",
                        row + 1
                    )))
                }
            };
            match cells.as_slice() {
                [f, re] => {
                    freqs.push(*f);
                    values.push(Complex64::new(*re, 0.0));
                }
                [f, re, im] => {
                    freqs.push(*f);
                    values.push(Complex64::new(*re, *im));
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "row {}: expected 2 or 3 columns, got {}",
                        row + 1,
                        cells.len()
                    )))
                }
            }
        }
        Self::tabulated(freqs, values)
    }

    /// Samples this spectrum on `[lo, hi]` with `samples` equispaced points.
    pub fn tabulate(&self, lo: f64, hi: f64, samples: usize) -> Result<Self> {
        if samples < 2 || !(hi > lo) {
            return Err(Error::InvalidArgument(
                "tabulate needs hi > lo and at least two samples".into(),
            ));
        }
        let step = (hi - lo) / (samples - 1) as f64;
        let freqs: Vec<f64> = (0..samples).map(|i| lo + step * i as f64).collect();
        let values = freqs
            .iter()
            .map(|&f| psf_spectrum(self, f))
            .collect::<Result<Vec<_>>>()?;
        Self::tabulated(freqs, values)
    }

    /// Tabulated copy of this spectrum on unit-spaced knots covering the band
    /// of `n` frequencies, with every value multiplied by `factor`.
    pub fn scaled(&self, n: usize, factor: Complex64) -> Result<Self> {
        let half = (n.max(2) - 1) as f64 / 2.0;
        let base = match self {
            PsfSpec::Tabulated { .. } => self.clone(),
            _ => self.tabulate(-half, half, 16 * (n.max(2) - 1) + 1)?,
        };
        match base {
            PsfSpec::Tabulated { freqs, values } => {
                Self::tabulated(freqs, values.into_iter().map(|v| v * factor).collect())
            }
            _ => unreachable!(),
        }
    }

    /// Checks invariants that depend on the bandwidth the PSF is used with.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        match self {
            PsfSpec::Dirac => Ok(()),
            PsfSpec::Gaussian { sigma } => {
                if sigma.is_finite() && *sigma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "gaussian sigma must be positive, got {sigma}"
                    )))
                }
            }
            PsfSpec::Tabulated { freqs, .. } => {
                let half = (n as f64 - 1.0) / 2.0;
                let (lo, hi) = (freqs[0], freqs[freqs.len() - 1]);
                if lo <= -half && hi >= half {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "tabulated psf covers [{lo}, {hi}] but bandwidth {n} needs [{}, {half}]",
                        -half
                    )))
                }
            }
        }
    }
}

impl fmt::Display for PsfSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsfSpec::Dirac => write!(f, "dirac"),
            PsfSpec::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            PsfSpec::Tabulated { freqs, .. } => write!(f, "tabulated({} samples)", freqs.len()),
        }
    }
}

impl FromStr for PsfSpec {
    type Err = Error;

    /// Accepts `dirac`, `gaussian:<sigma>` and `tabulated:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("dirac") {
            return Ok(PsfSpec::Dirac);
        }
        if let Some(rest) = s.strip_prefix("gaussian:") {
            let sigma: f64 = rest.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("cannot parse gaussian sigma from {rest:?}"))
            })?;
            return PsfSpec::gaussian(sigma);
        }
        if let Some(path) = s.strip_prefix("tabulated:") {
            return PsfSpec::from_csv_path(path.trim());
        }
        Err(Error::InvalidArgument(format!(
            "unknown psf {s:?}; expected dirac, gaussian:<sigma> or tabulated:<path>"
        )))
    }
}

/// Evaluates `ĝ(f)`.
pub fn psf_spectrum(psf: &PsfSpec, f: f64) -> Result<Complex64> {
    if !f.is_finite() {
        return Err(Error::Domain(format!("frequency must be finite, got {f}")));
    }
    match psf {
        PsfSpec::Dirac => Ok(Complex64::new(1.0, 0.0)),
        PsfSpec::Gaussian { sigma } => {
            Ok(Complex64::new((-2.0 * PI * PI * sigma * sigma * f * f).exp(), 0.0))
        }
        PsfSpec::Tabulated { freqs, values } => {
            let last = freqs.len() - 1;
            if f < freqs[0] || f > freqs[last] {
                return Err(Error::Domain(format!(
                    "frequency {f} outside tabulated range [{}, {}]",
                    freqs[0], freqs[last]
                )));
            }
            // index of the first knot strictly greater than f
            let hi = freqs.partition_point(|&x| x <= f);
            if hi == 0 {
                return Ok(values[0]);
            }
            if hi > last {
                return Ok(values[last]);
            }
            let lo = hi - 1;
            let t = (f - freqs[lo]) / (freqs[hi] - freqs[lo]);
            Ok(values[lo] * (1.0 - t) + values[hi] * t)
        }
    }
}

/// Symmetric unit-spaced frequencies `f_i = (2i − N − 1)/2`, `i = 1..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    values: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(n: usize) -> Result<Self> {
        frequency_grid(n)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Half-width `(N − 1)/2` of the band `J_N`.
    pub fn half_band(&self) -> f64 {
        (self.values.len() as f64 - 1.0) / 2.0
    }
}

pub fn frequency_grid(n: usize) -> Result<FrequencyGrid> {
    if n == 0 {
        return Err(Error::InvalidArgument("bandwidth N must be at least 1".into()));
    }
    let values = (1..=n)
        .map(|i| (2.0 * i as f64 - n as f64 - 1.0) / 2.0)
        .collect();
    Ok(FrequencyGrid { values })
}

/// `[Φ_γ]_{i,k} = exp(−j2π γ_k f_i)`.
pub fn build_phi(tau: &[f64], grid: &FrequencyGrid) -> CMatrix {
    let f = grid.values();
    CMatrix::from_fn(f.len(), tau.len(), |i, k| {
        Complex64::from_polar(1.0, -2.0 * PI * tau[k] * f[i])
    })
}

/// Diagonal of `G`.
pub fn g_diagonal(psf: &PsfSpec, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
    grid.values().iter().map(|&f| psf_spectrum(psf, f)).collect()
}

pub fn build_g_matrix(psf: &PsfSpec, grid: &FrequencyGrid) -> Result<CMatrix> {
    let diag = g_diagonal(psf, grid)?;
    Ok(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
}

/// Diagonal of `Λ`, `[Λ]_{i,i} = −j2π f_i`.
pub fn lambda_diagonal(grid: &FrequencyGrid) -> Vec<Complex64> {
    grid.values()
        .iter()
        .map(|&f| Complex64::new(0.0, -2.0 * PI * f))
        .collect()
}

pub fn build_lambda(grid: &FrequencyGrid) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda_diagonal(grid)))
}

/// One spike-localization problem: bandwidth, PSF, ground-truth locations on
/// the unit torus and the `K × L` amplitude matrix.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    grid: FrequencyGrid,
    psf: PsfSpec,
    tau: Vec<f64>,
    x: CMatrix,
    g: Vec<Complex64>,
    lambda: Vec<Complex64>,
}

impl ProblemInstance {
    pub fn new(n: usize, psf: PsfSpec, tau: Vec<f64>, x: CMatrix) -> Result<Self> {
        let grid = frequency_grid(n)?;
        let k = tau.len();
        if k == 0 {
            return Err(Error::InvalidArgument("need at least one spike".into()));
        }
        if x.nrows() != k {
            return Err(Error::InvalidArgument(format!(
                "amplitude matrix has {} rows but there are {k} spikes",
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidArgument("need at least one snapshot".into()));
        }
        if n <= 2 * k {
            return Err(Error::InvalidArgument(format!(
                "unique recovery needs N > 2K, got N = {n}, K = {k}"
            )));
        }
        if tau.iter().any(|t| !t.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "spike locations and amplitudes must be finite".into(),
            ));
        }
        psf.validate_for(n)?;
        let g = g_diagonal(&psf, &grid)?;
        let nonzero = g.iter().filter(|v| v.norm() > 0.0).count();
        if nonzero < k {
            return Err(Error::Rank(format!(
                "G has {nonzero} nonzero diagonal entries, fewer than K = {k}"
            )));
        }
        let lambda = lambda_diagonal(&grid);
        Ok(Self {
            grid,
            psf,
            tau,
            x,
            g,
            lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn k(&self) -> usize {
        self.tau.len()
    }

    pub fn l(&self) -> usize {
        self.x.ncols()
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn psf(&self) -> &PsfSpec {
        &self.psf
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn amplitudes(&self) -> &CMatrix {
        &self.x
    }

    pub fn g_diag(&self) -> &[Complex64] {
        &self.g
    }

    pub fn lambda_diag(&self) -> &[Complex64] {
        &self.lambda
    }

    /// `G Φ_γ`.
    pub fn gphi(&self, gamma: &[f64]) -> CMatrix {
        scale_rows(&self.g, &build_phi(gamma, &self.grid))
    }

    /// `Λ G Φ_γ` (the diagonals commute).
    pub fn lgphi(&self, gamma: &[f64]) -> CMatrix {
        scale_rows(&self.lambda, &self.gphi(gamma))
    }

    /// Noiseless observation `G Φ_τ X`.
    pub fn signal(&self) -> CMatrix {
        self.gphi(&self.tau) * &self.x
    }

    pub fn with_amplitudes(&self, x: CMatrix) -> Result<Self> {
        Self::new(self.n(), self.psf.clone(), self.tau.clone(), x)
    }

    pub fn with_psf(&self, psf: PsfSpec) -> Result<Self> {
        Self::new(self.n(), psf, self.tau.clone(), self.x.clone())
    }

    pub fn with_tau(&self, tau: Vec<f64>) -> Result<Self> {
        Self::new(self.n(), self.psf.clone(), tau, self.x.clone())
    }
}

/// `Y = G Φ_τ X + Z`.
pub fn synthesize(instance: &ProblemInstance, z: &CMatrix) -> Result<CMatrix> {
    if z.nrows() != instance.n() || z.ncols() != instance.l() {
        return Err(Error::InvalidArgument(format!(
            "noise is {}x{} but observations are {}x{}",
            z.nrows(),
            z.ncols(),
            instance.n(),
            instance.l()
        )));
    }
    Ok(instance.signal() + z)
}
