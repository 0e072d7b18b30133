//! Footprints and the cut-off and localized Lagrange bases.

use rayon::prelude::*;

use crate::bases::interpolant;
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, LocalSystem};
use crate::linalg::{Cholesky, DenseMatrix, SparseMatrix};
use crate::pointset::DataSiteSet;

/// Local neighborhood `X_i` of site `i`, members ascending by global index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    center: usize,
    members: Vec<usize>,
    local_center: usize,
}

impl Footprint {
    pub fn new(center: usize, members: Vec<usize>) -> Result<Self> {
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubset("footprint members must be strictly increasing".into()));
        }
        let local_center = members
            .binary_search(&center)
            .map_err(|_| Error::InvalidSubset(format!("footprint of {center} does not contain it")))?;
        Ok(Self { center, members, local_center })
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Position `m` of the center within `members`.
    pub fn local_center(&self) -> usize {
        self.local_center
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// One footprint per site.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprints {
    items: Vec<Footprint>,
    kappa: Option<f64>,
    radius: Option<f64>,
}

/// `κ h |ln h|`.
pub fn footprint_radius(fill_distance: f64, kappa: f64) -> Result<f64> {
    if !(fill_distance > 0.0 && fill_distance < 1.0) {
        return Err(Error::DegenerateRadius { fill_distance });
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
    }
    Ok(kappa * fill_distance * fill_distance.ln().abs())
}

/// `X_i = { x_j : ‖x_i − x_j‖₂ ≤ κ h |ln h| }`.
pub fn footprint(sites: &DataSiteSet, fill_distance: f64, i: usize, kappa: f64) -> Result<Footprint> {
    let r = footprint_radius(fill_distance, kappa)?;
    Footprint::new(i, sites.neighbors_within(i, r))
}

impl Footprints {
    pub fn from_kappa(sites: &DataSiteSet, fill_distance: f64, kappa: f64) -> Result<Self> {
        let r = footprint_radius(fill_distance, kappa)?;
        let items = (0..sites.len())
            .into_par_iter()
            .map(|i| Footprint { center: i, local_center: 0, members: sites.neighbors_within(i, r) })
            .map(|mut f| {
                f.local_center = f.members.binary_search(&f.center).expect("center is always a member");
                f
            })
            .collect();
        Ok(Self { items, kappa: Some(kappa), radius: Some(r) })
    }

    /// Every footprint is the whole index set.
    pub fn full(n: usize) -> Self {
        let all: Vec<usize> = (0..n).collect();
        let items = (0..n).map(|i| Footprint { center: i, members: all.clone(), local_center: i }).collect();
        Self { items, kappa: None, radius: None }
    }

    pub fn singletons(n: usize) -> Self {
        let items = (0..n).map(|i| Footprint { center: i, members: vec![i], local_center: 0 }).collect();
        Self { items, kappa: None, radius: None }
    }

    /// Footprint `i` must be centered at `i`.
    pub fn from_items(items: Vec<Footprint>) -> Result<Self> {
        if let Some((i, _)) = items.iter().enumerate().find(|(i, f)| f.center != *i) {
            return Err(Error::InvalidInput(format!("footprint {i} is centered elsewhere")));
        }
        Ok(Self { items, kappa: None, radius: None })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &Footprint {
        &self.items[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Footprint> {
        self.items.iter()
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn mean_size(&self) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        self.items.iter().map(Footprint::len).sum::<usize>() as f64 / self.items.len() as f64
    }

    pub fn total_size(&self) -> usize {
        self.items.iter().map(Footprint::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Cutoff,
    Localized,
}

/// Sparse coefficient matrix `B`; column `i` expands the basis function of site `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedBasis {
    pub coeffs: SparseMatrix,
    pub kind: BasisKind,
    pub kappa: Option<f64>,
    pub lambda: f64,
}

/// Default site-count limit for bases that need the dense inverse.
pub const CUTOFF_MAX_SITES: usize = 5000;

/// Column `i` of `A⁻¹` restricted to footprint `i`.
pub fn cutoff_lagrange(a_inv: &DenseMatrix, footprints: &Footprints, lambda: f64) -> Result<LocalizedBasis> {
    let n = a_inv.rows();
    if footprints.len() != n || a_inv.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: footprints.len() });
    }
    let columns = footprints
        .iter()
        .map(|f| f.members.iter().map(|&j| (j, a_inv[(j, f.center)])).collect())
        .collect();
    Ok(LocalizedBasis {
        coeffs: SparseMatrix::from_sorted_columns(n, columns)?,
        kind: BasisKind::Cutoff,
        kappa: footprints.kappa,
        lambda,
    })
}

/// Solves `(A + λI)|_{X_i} β = e_m` per footprint and scatters `β` into column `i`.
pub fn localized_lagrange(system: &impl LocalSystem, footprints: &Footprints) -> Result<LocalizedBasis> {
    let n = system.site_count();
    if footprints.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: footprints.len() });
    }
    let factor = |f: &Footprint| {
        Cholesky::factor(&system.principal(&f.members))
            .map_err(|_| Error::FootprintNotPositiveDefinite { center: f.center, size: f.len() })
    };
    // Footprints covering every site share one block; factor it once.
    let whole = footprints.items.iter().find(|f| f.len() == n).map(factor).transpose()?;
    let columns = footprints
        .items
        .par_iter()
        .map(|f| {
            let local;
            let chol = match &whole {
                Some(shared) if f.len() == n => shared,
                _ => {
                    local = factor(f)?;
                    &local
                }
            };
            let mut e = vec![0.0; f.len()];
            e[f.local_center] = 1.0;
            let beta = chol.solve(&e);
            Ok(f.members.iter().copied().zip(beta).collect())
        })
        .collect::<Result<Vec<Vec<(usize, f64)>>>>()?;
    Ok(LocalizedBasis {
        coeffs: SparseMatrix::from_sorted_columns(n, columns)?,
        kind: BasisKind::Localized,
        kappa: footprints.kappa,
        lambda: system.lambda(),
    })
}

/// `Σ_i f_i χ_i^{loc}(y_q)`.
pub fn quasi_interpolant(
    basis: &LocalizedBasis,
    data: &[f64],
    spec: &KernelSpec,
    sites: &DataSiteSet,
    queries: &[f64],
) -> Result<Vec<f64>> {
    interpolant(&basis.coeffs, spec, sites, data, queries)
}
