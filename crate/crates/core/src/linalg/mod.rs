//! Dense and sparse linear algebra used throughout the crate.

pub mod cholesky;
pub mod dense;
pub mod eigen;
pub mod krylov;
pub mod matrix_market;
pub mod sparse;
pub mod sparse_cholesky;

pub use cholesky::{cholesky, Cholesky};
pub use dense::DenseMatrix;
pub use eigen::{spd_power, sqrt_spd, sym_eig, SymmetricEigen};
pub use krylov::{gmres, inverse_spectral_error, pcg, power_iteration_spectral_error, SolveReport};
pub use sparse::{sparse_triangular_solve, SparseMatrix};
pub use sparse_cholesky::{FillOrdering, SparseCholesky};
