//! Weighted-space discretization of the configuration ball.

pub(crate) mod archive;
mod basis;
mod coeffs;
pub mod quadrature;

pub use archive::{read_basis, write_basis, BASIS_MAGIC, BASIS_VERSION};
pub use basis::{BallBasis, Poincare, WeightedNorms, DEFAULT_GRAM_TOL, GAP_FLOOR, TRACE_TOL};
pub use coeffs::ConfigCoeffs;
