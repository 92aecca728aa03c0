//! Householder QR in a non-standard inner product.
//!
//! For a Hermitian positive-definite `B`, the drivers in [`factor`] compute
//! `X = Q R` with `QᴴBQ = I` and upper triangular `R`. Reflections
//! `H = I - 2 w wᴴ B` with `||w||_B = 1` keep the loss of B-orthogonality
//! independent of the conditioning of `X`, and only depend on the
//! conditioning of `B`.
//!
//! ```
//! use oblique_qr::{initial_basis, householder_qr_right, BOperator, Matrix, OrthOptions};
//!
//! let b = BOperator::explicit(Matrix::diag_real(&[4.0, 1.0, 9.0])).unwrap();
//! let x = Matrix::from_real_rows(&[[1.0, 2.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
//! let u = initial_basis(&b, 2).unwrap();
//! let qr = householder_qr_right(&x, &b, &u, &OrthOptions::default()).unwrap();
//! let residual = qr.q.matmul(&qr.r).unwrap().sub(&x).unwrap();
//! assert!(residual.norm_max() < 1e-14);
//! ```

pub mod dense;
mod error;
pub mod factor;
pub mod gram_schmidt;
mod matrix;
pub mod mmio;
pub mod operator;
pub mod probe;
pub mod reflector;

pub use error::{Error, Result};
pub use factor::{
    assemble_q, householder_qr, householder_qr_block, householder_qr_left, householder_qr_right,
    initial_basis, Driver, LeftLooking, OrthOptions, OrthoBasis, QRFactorization,
};
pub use gram_schmidt::{gram_schmidt, gram_schmidt_with, GsOptions, GsVariant, SecondPassCoefficients};
pub use matrix::{Matrix, C64};
pub use operator::{b_inner, b_norm, b_norm_checked, BOperator, IndefinitenessWarning};
pub use reflector::{make_reflector, wy_apply, wy_build, Direction, ReflectorSet};
