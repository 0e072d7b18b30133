//! Symmetric footprint preconditioners `C Cᵀ ≈ (A + λI)⁻¹`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::LocalSystem;
use crate::lagrange::{Footprint, Footprints};
use crate::linalg::{sym_eig, Cholesky, DenseMatrix, SparseMatrix, SymmetricEigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerVariant {
    /// Column `i` solves `(A + λI)|_{X_i}^{1/2} α = e_m`.
    Sqrt,
    /// Column `i` solves `L_iᵀ α = e_m` with `(A + λI)|_{X_i} = L_i L_iᵀ`.
    Cholesky,
}

impl PreconditionerVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sqrt => "sqrt",
            Self::Cholesky => "cholesky",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricPreconditioner {
    pub factor: SparseMatrix,
    pub variant: PreconditionerVariant,
    pub kappa: Option<f64>,
    pub lambda: f64,
}

impl SymmetricPreconditioner {
    /// `z = C (Cᵀ x)`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.factor.spmv(&self.factor.transpose_spmv(x))
    }

    pub fn dim(&self) -> usize {
        self.factor.n_rows()
    }

    /// Columns of the Cholesky-variant factor read as a localized Newton basis.
    pub fn localized_newton_basis(&self) -> Result<&SparseMatrix> {
        match self.variant {
            PreconditionerVariant::Cholesky => Ok(&self.factor),
            PreconditionerVariant::Sqrt => Err(Error::WrongVariant { expected: "cholesky" }),
        }
    }
}

/// Factorization of one footprint block, from which any column is cheap.
enum LocalFactor {
    Sqrt(SymmetricEigen),
    Cholesky(Cholesky),
}

impl LocalFactor {
    fn new(local: &DenseMatrix, variant: PreconditionerVariant) -> Result<Self> {
        match variant {
            PreconditionerVariant::Sqrt => {
                let eig = sym_eig(local)?;
                eig.ensure_positive()?;
                Ok(Self::Sqrt(eig))
            }
            PreconditionerVariant::Cholesky => Ok(Self::Cholesky(Cholesky::factor(local)?)),
        }
    }

    fn column(&self, m: usize) -> Vec<f64> {
        match self {
            Self::Sqrt(eig) => eig.map_spectrum_column(m, |w| 1.0 / w.sqrt()),
            Self::Cholesky(chol) => {
                let mut e = vec![0.0; chol.dim()];
                e[m] = 1.0;
                let mut alpha = chol.solve_lower_transpose(&e);
                alpha.truncate(m + 1);
                alpha
            }
        }
    }
}

fn build(
    system: &impl LocalSystem,
    footprints: &Footprints,
    variant: PreconditionerVariant,
) -> Result<SymmetricPreconditioner> {
    let n = system.site_count();
    if footprints.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: footprints.len() });
    }
    let local_error = |f: &Footprint, e: Error| match e {
        Error::NotPositiveDefinite { .. } => Error::FootprintNotPositiveDefinite { center: f.center(), size: f.len() },
        other => other,
    };
    // Footprints covering every site share one block; factor it once.
    let whole = match footprints.iter().find(|f| f.len() == n) {
        Some(f) => Some(LocalFactor::new(&system.principal(f.members()), variant).map_err(|e| local_error(f, e))?),
        None => None,
    };
    let column = |f: &Footprint| -> Result<Vec<(usize, f64)>> {
        let alpha = match &whole {
            Some(shared) if f.len() == n => shared.column(f.local_center()),
            _ => LocalFactor::new(&system.principal(f.members()), variant)
                .map_err(|e| local_error(f, e))?
                .column(f.local_center()),
        };
        Ok(f.members().iter().copied().zip(alpha).collect())
    };
    let items: Vec<&Footprint> = footprints.iter().collect();
    let columns = items.par_iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;
    Ok(SymmetricPreconditioner {
        factor: SparseMatrix::from_sorted_columns(n, columns)?,
        variant,
        kappa: footprints.kappa(),
        lambda: system.lambda(),
    })
}

pub fn build_sqrt_preconditioner(
    system: &impl LocalSystem,
    footprints: &Footprints,
) -> Result<SymmetricPreconditioner> {
    build(system, footprints, PreconditionerVariant::Sqrt)
}

/// Footprint members are ascending in global index, so the factor is upper triangular.
pub fn build_cholesky_preconditioner(
    system: &impl LocalSystem,
    footprints: &Footprints,
) -> Result<SymmetricPreconditioner> {
    build(system, footprints, PreconditionerVariant::Cholesky)
}

pub fn build_preconditioner(
    system: &impl LocalSystem,
    footprints: &Footprints,
    variant: PreconditionerVariant,
) -> Result<SymmetricPreconditioner> {
    build(system, footprints, variant)
}
