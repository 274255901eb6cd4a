//! Solution operators for linear systems of multi-order fractional
//! differential equations `D^B U(t) = F U(t) + H(t)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`special`]: gamma function and friends.
//! - [`ml_scalar`]: two-parameter Mittag-Leffler function and its derivatives.
//! - [`ml_matrix`]: Jordan decomposition, matrix-valued and vector-indexed
//!   Mittag-Leffler functions.
//! - [`frac_ops`]: fractional integrals/derivatives, convolution and a numerical
//!   Laplace transform on uniformly sampled functions.
//! - [`symbol`]: fractional-exponent polynomials in the Laplace variable and the
//!   Mittag-Leffler kernel series built from them.
//! - [`solver`]: the solution-operator constructions (general series,
//!   commensurate, rational augmentation, triangular) and Duhamel forcing.
//! - [`oracles`]: independent reference solvers (Talbot inversion, fractional
//!   Adams predictor-corrector, matrix exponential).
//! - [`spectral`]: per-Fourier-mode application of matrix symbols on periodic grids.

pub mod error;
pub mod frac_ops;
pub mod linalg;
pub mod ml_matrix;
pub mod ml_scalar;
pub mod oracles;
pub mod solver;
pub mod special;
pub mod spectral;
pub mod symbol;

pub use error::{Error, Result};
pub use num_complex::Complex64;
