//! Dual bases for scattered-data kernel approximation.
//!
//! Kernel matrices over scattered sites, localized Lagrange and Newton
//! bases on footprints, symmetric footprint preconditioners for CG, and
//! samplet compression of kernel matrices and their inverses.

pub mod bases;
pub mod bench;
pub mod error;
pub mod kernels;
pub mod lagrange;
pub mod linalg;
pub mod pointset;
pub mod precond;
pub mod samplets;

pub use error::{Error, Result};
