//! Dense complex linear algebra used by the sensitivity formulas.
//!
//! All vectorisations are column-major: `vec(Z)` stacks the columns of `Z`
//! vertically, and `ι(Z) = [Re vec Z; Im vec Z]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const SVD_MAX_ITERS: usize = 10_000;

fn ensure_finite(a: &CMatrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what}: matrix has non-finite entries")))
    }
}

fn svd(a: &CMatrix, vectors: bool) -> Result<nalgebra::SVD<Complex64, nalgebra::Dyn, nalgebra::Dyn>> {
    ensure_finite(a, "svd")?;
    a.clone()
        .try_svd(vectors, vectors, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or_else(|| Error::Numerical(format!("svd of {}x{} matrix did not converge", a.nrows(), a.ncols())))
}

/// Moore–Penrose pseudo-inverse. Singular values below
/// `1e-12 · max(rows, cols) · σ_max` are treated as zero.
pub fn pseudo_inverse(a: &CMatrix) -> Result<CMatrix> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("pseudo-inverse of an empty matrix".into()));
    }
    let dec = svd(a, true)?;
    let sigma_max = dec.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = 1e-12 * a.nrows().max(a.ncols()) as f64 * sigma_max;
    let u = dec.u.as_ref().expect("u requested");
    let v_t = dec.v_t.as_ref().expect("v_t requested");
    let mut out = CMatrix::zeros(a.ncols(), a.nrows());
    for (j, &s) in dec.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            // A† = Σ_j v_j u_j* / σ_j
            let v_j = v_t.row(j).adjoint();
            let u_j = u.column(j);
            out += (v_j * u_j.adjoint()) * Complex64::new(1.0 / s, 0.0);
        }
    }
    Ok(out)
}

/// `P⊥ = I − A A†`, the projector onto the orthogonal complement of the column
/// space of `A`.
pub fn projector_complement(a: &CMatrix) -> Result<CMatrix> {
    if a.nrows() < a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "projector needs rows >= cols, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let pinv = pseudo_inverse(a)?;
    Ok(CMatrix::identity(a.nrows(), a.nrows()) - a * pinv)
}

/// Column-wise Kronecker product: column `k` is `a[:, k] ⊗ b[:, k]`.
pub fn khatri_rao(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::InvalidArgument(format!(
            "khatri-rao needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ra, rb) = (a.nrows(), b.nrows());
    Ok(CMatrix::from_fn(ra * rb, a.ncols(), |r, k| a[(r / rb, k)] * b[(r % rb, k)]))
}

pub fn hadamard(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidArgument(format!(
            "hadamard needs equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.component_mul(b))
}

/// `ι(Z) = [Re vec Z; Im vec Z]`.
pub fn iota(z: &CMatrix) -> DVector<f64> {
    let len = z.len();
    let mut out = DVector::zeros(2 * len);
    // nalgebra storage is column-major, so iteration order is vec order
    for (i, v) in z.iter().enumerate() {
        out[i] = v.re;
        out[len + i] = v.im;
    }
    out
}

pub fn iota_inverse(v: &DVector<f64>, rows: usize, cols: usize) -> Result<CMatrix> {
    let len = rows * cols;
    if v.len() != 2 * len {
        return Err(Error::InvalidArgument(format!(
            "iota inverse: vector of length {} does not match {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        let idx = j * rows + i;
        Complex64::new(v[idx], v[len + idx])
    }))
}

/// Largest singular value; zero for an empty matrix.
pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let dec = svd(a, false)?;
    Ok(dec.singular_values.iter().cloned().fold(0.0, f64::max))
}

pub fn real_spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("spectral norm: non-finite entries".into()));
    }
    let dec = a
        .clone()
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or_else(|| Error::Numerical("svd did not converge".into()))?;
    Ok(dec.singular_values.iter().cloned().fold(0.0, f64::max))
}

/// Largest Euclidean norm over the columns.
pub fn norm_inf_to_2(a: &CMatrix) -> f64 {
    a.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.norm()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("eigenvalues need a square matrix".into()));
    }
    ensure_finite(a, "eigenvalues")?;
    let herm = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(herm, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or_else(|| Error::Numerical("hermitian eigendecomposition did not converge".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(values)
}

/// `diag(d) · m` without materialising the diagonal matrix.
pub fn scale_rows(diag: &[Complex64], m: &CMatrix) -> CMatrix {
    assert_eq!(diag.len(), m.nrows(), "diagonal length must match row count");
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| diag[i] * m[(i, j)])
}

/// Matrix of independent circular complex Gaussians with unit variance
/// (`E|z|² = 1`).
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = rng.sample(rand_distr::StandardNormal);
        Complex64::new(scale * re, scale * im)
    })
}

/// Random matrix with unit Frobenius norm and uniformly distributed direction.
pub fn unit_frobenius<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let z = complex_gaussian(rows, cols, rng);
    let n = z.norm();
    z / Complex64::new(n, 0.0)
}
