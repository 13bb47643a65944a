//! Self-contained dense linear algebra for the desk-scale matrices used by the
//! distributed solvers and the iteration-map analysis.
//!
//! Everything is row-major `f64`. Nothing here is sparse or blocked; the
//! largest matrices handled are a few hundred rows on a side.

mod cholesky;
mod eigen;
mod error;
mod lu;
mod matrix;
mod qr;
mod symmetric;
pub mod vector;

pub use cholesky::{cholesky_solve, Cholesky};
pub use eigen::{eigenvalues_general, spectral_radius, Spectrum, DEFAULT_DEFLATION_TOL};
pub use error::{LinalgError, Result};
pub use lu::Lu;
pub use matrix::Matrix;
pub use qr::{random_orthonormal_columns, thin_q};
pub use symmetric::{spd_condition_number, symmetric_eigenvalues};

pub use num_complex::Complex64;

/// Scales `x` so that its Frobenius norm is one.
///
/// After normalization the eigenvalues of `XᵀX` sum to one.
pub fn frobenius_normalize(x: &Matrix) -> Result<Matrix> {
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    Ok(x.scaled(1.0 / norm))
}
