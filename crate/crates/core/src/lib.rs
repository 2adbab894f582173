//! Small-noise sensitivity analysis for locating pulses convolved with a known
//! point spread function, observed over multiple snapshots.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: frequency grid, PSF spectra and the matrices `Φ_τ`, `G`, `Λ`.
//! - [`matrixops`]: dense complex linear algebra (pseudo-inverse, projectors,
//!   Khatri–Rao products, the real embedding `ι`).
//! - [`sensitivity`]: the variable-projection loss, its gradient, the
//!   zero-noise Jacobians and the implicit-function Jacobian of the inverse map.
//! - [`bounds`]: spectral characteristics of the PSF and the interpretable
//!   upper bounds on the Jacobian norm and the noise propagation factor.
//! - [`estimator`]: a local variable-projection solver realising the inverse
//!   map empirically.
//! - [`experiments`]: Monte Carlo sweeps with worst-case maximisation,
//!   deterministic seeding and CSV/JSON output.
//! - [`cli`]: the `spike-sens` command line.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod matrixops;
pub mod model;
pub mod sensitivity;

pub use error::{Error, Result};
pub use matrixops::CMatrix;
pub use model::{FrequencyGrid, ProblemInstance, PsfSpec};
pub use num_complex::Complex64;
