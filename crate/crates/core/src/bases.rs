//! Dense reference bases of the kernel-translate space: dual pairs, Lagrange and
//! Newton bases, and their evaluation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{cross_matrix, KernelMatrix, KernelSpec};
use crate::linalg::{sym_eig, Cholesky, DenseMatrix, SparseMatrix};
use crate::pointset::DataSiteSet;

/// Coefficients of two bases in the kernel-translate basis with `primalᵀ A dual = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    pub primal: DenseMatrix,
    pub dual: DenseMatrix,
    pub gamma: f64,
}

/// `primal = A^γ`, `dual = A^{−1−γ}`.
pub fn dual_pair(a: &KernelMatrix, gamma: f64) -> Result<DualPair> {
    let eig = sym_eig(a.matrix())?;
    eig.ensure_positive()?;
    let primal = eig.map_spectrum(|w| w.powf(gamma));
    let dual = if gamma == -0.5 { primal.clone() } else { eig.map_spectrum(|w| w.powf(-1.0 - gamma)) };
    Ok(DualPair { primal, dual, gamma })
}

/// `A⁻¹`; column `i` holds the coefficients of the Lagrange function `χ_i`.
pub fn lagrange_coefficients(a: &KernelMatrix) -> Result<DenseMatrix> {
    Ok(Cholesky::factor(a.matrix())?.inverse())
}

/// Upper-triangular `C = L^{−T}` for `A = LLᵀ`: `CᵀAC = I` and column `i`
/// vanishes at the sites before `i`.
pub fn newton_basis(a: &KernelMatrix) -> Result<DenseMatrix> {
    Ok(Cholesky::factor(a.matrix())?.lower_inverse().transpose())
}

/// A coefficient matrix whose columns expand basis functions in kernel translates.
pub trait CoefficientMatrix: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// `C x`.
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    /// `K C` for a kernel block `K` with `n_rows()` columns.
    fn left_multiply(&self, k: &DenseMatrix) -> DenseMatrix;
}

impl CoefficientMatrix for DenseMatrix {
    fn n_rows(&self) -> usize {
        self.rows()
    }

    fn n_cols(&self) -> usize {
        self.cols()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }

    fn left_multiply(&self, k: &DenseMatrix) -> DenseMatrix {
        k.matmul(self)
    }
}

impl CoefficientMatrix for SparseMatrix {
    fn n_rows(&self) -> usize {
        SparseMatrix::n_rows(self)
    }

    fn n_cols(&self) -> usize {
        SparseMatrix::n_cols(self)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.spmv(x)
    }

    fn left_multiply(&self, k: &DenseMatrix) -> DenseMatrix {
        let m = self.n_cols();
        let mut out = DenseMatrix::zeros(k.rows(), m);
        out.as_mut_slice().par_chunks_mut(m.max(1)).enumerate().for_each(|(q, row)| {
            let kq = k.row(q);
            for (i, v) in row.iter_mut().enumerate() {
                let (idx, vals) = self.column(i);
                *v = idx.iter().zip(vals).map(|(&j, &c)| c * kq[j]).sum();
            }
        });
        out
    }
}

/// Basis functions evaluated at query points: rows are queries, columns basis indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEvaluation {
    pub values: DenseMatrix,
}

fn check_rows(coeffs: &impl CoefficientMatrix, sites: &DataSiteSet) -> Result<()> {
    if coeffs.n_rows() != sites.len() {
        return Err(Error::DimensionMismatch { expected: sites.len(), found: coeffs.n_rows() });
    }
    Ok(())
}

/// `values[q][i] = Σ_j C[j][i] K(y_q, x_j)` for flattened query coordinates.
pub fn evaluate_basis(
    coeffs: &impl CoefficientMatrix,
    spec: &KernelSpec,
    sites: &DataSiteSet,
    queries: &[f64],
) -> Result<BasisEvaluation> {
    check_rows(coeffs, sites)?;
    let k = cross_matrix(spec, sites, queries)?;
    Ok(BasisEvaluation { values: coeffs.left_multiply(&k) })
}

/// `Σ_i f_i φ_i(y_q)` where column `i` of `coeffs` expands `φ_i`.
pub fn interpolant(
    coeffs: &impl CoefficientMatrix,
    spec: &KernelSpec,
    sites: &DataSiteSet,
    data: &[f64],
    queries: &[f64],
) -> Result<Vec<f64>> {
    check_rows(coeffs, sites)?;
    if data.len() != coeffs.n_cols() {
        return Err(Error::DimensionMismatch { expected: coeffs.n_cols(), found: data.len() });
    }
    let alpha = coeffs.apply(data);
    let dim = sites.dim();
    if queries.len() % dim != 0 {
        return Err(Error::DimensionMismatch { expected: dim, found: queries.len() % dim });
    }
    Ok(queries
        .par_chunks(dim)
        .map(|y| (0..sites.len()).map(|j| alpha[j] * spec.between(y, sites.point(j))).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::assemble;
    use crate::pointset::{equidistant_1d, generate_uniform, BoundingBox};
    use proptest::prelude::*;

    fn system(n: usize, seed: u64, lambda: f64) -> (KernelSpec, DataSiteSet, KernelMatrix) {
        let spec = KernelSpec::matern(1.5, 0.2).unwrap();
        let sites = generate_uniform(n, 2, seed);
        let a = assemble(&spec, &sites, lambda).unwrap();
        (spec, sites, a)
    }

    /// ‖PᵀAD − I‖_F computed with plain triple loops.
    fn duality_defect(p: &DenseMatrix, a: &DenseMatrix, d: &DenseMatrix) -> f64 {
        let n = a.rows();
        let mut ad = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[(i, k)];
                for j in 0..n {
                    ad[i * n + j] += aik * d[(k, j)];
                }
            }
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| p[(k, i)] * ad[k * n + j]).sum();
                let e = v - if i == j { 1.0 } else { 0.0 };
                s += e * e;
            }
        }
        s.sqrt()
    }

    #[test]
    fn gamma_zero_gives_translates_and_inverse() {
        let (_, _, a) = system(60, 1, 0.06);
        let pair = dual_pair(&a, 0.0).unwrap();
        assert!(pair.primal.sub(&DenseMatrix::identity(60)).max_abs() < 1e-12);
        let inv = lagrange_coefficients(&a).unwrap();
        assert!(pair.dual.sub(&inv).max_abs() < 1e-6 * inv.max_abs());
    }

    #[test]
    fn gamma_minus_half_is_orthonormal_and_self_dual() {
        let (_, _, a) = system(80, 2, 0.08);
        let pair = dual_pair(&a, -0.5).unwrap();
        assert_eq!(pair.primal, pair.dual);
        assert!(duality_defect(&pair.primal, a.matrix(), &pair.primal) < 1e-8);
    }

    #[test]
    fn one_by_one_pair() {
        let a = KernelMatrix::from_parts(DenseMatrix::from_diagonal(&[4.0]), 0.0);
        let pair = dual_pair(&a, 1.0).unwrap();
        assert!((pair.primal[(0, 0)] - 4.0).abs() < 1e-14);
        assert!((pair.dual[(0, 0)] - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn duality_for_several_gammas() {
        let (_, _, a) = system(150, 3, 0.15);
        for gamma in [-1.0, -0.5, 0.0, 0.5] {
            let pair = dual_pair(&a, gamma).unwrap();
            let d = duality_defect(&pair.primal, a.matrix(), &pair.dual);
            assert!(d <= 1e-6, "gamma {gamma}: {d}");
        }
    }

    #[test]
    fn two_by_two_inverse() {
        let a = 0.3;
        let m = KernelMatrix::from_parts(DenseMatrix::from_rows(&[vec![1.0, a], vec![a, 1.0]]).unwrap(), 0.0);
        let inv = lagrange_coefficients(&m).unwrap();
        let s = 1.0 / (1.0 - a * a);
        for (i, j, want) in [(0, 0, s), (0, 1, -a * s), (1, 0, -a * s), (1, 1, s)] {
            assert!((inv[(i, j)] - want).abs() < 1e-14);
        }
        let id = KernelMatrix::from_parts(DenseMatrix::identity(3), 0.0);
        assert_eq!(lagrange_coefficients(&id).unwrap(), DenseMatrix::identity(3));
    }

    #[test]
    fn lagrange_property_on_a_line() {
        let spec = KernelSpec::h1_line();
        let sites = equidistant_1d(200, 0.0, 1.0);
        let a = assemble(&spec, &sites, 0.0).unwrap();
        let inv = lagrange_coefficients(&a).unwrap();
        let ev = evaluate_basis(&inv, &spec, &sites, sites.coords()).unwrap();
        assert!(ev.values.identity_defect() <= 1e-8);
    }

    #[test]
    fn identity_coefficients_give_translates() {
        let (spec, sites, _) = system(30, 4, 0.0);
        let q = generate_uniform(7, 2, 5);
        let ev = evaluate_basis(&DenseMatrix::identity(30), &spec, &sites, q.coords()).unwrap();
        for a in 0..7 {
            for j in 0..30 {
                assert_eq!(ev.values[(a, j)], spec.between(q.point(a), sites.point(j)));
            }
        }
        let sparse = SparseMatrix::identity(30);
        assert_eq!(evaluate_basis(&sparse, &spec, &sites, q.coords()).unwrap(), ev);
    }

    #[test]
    fn single_site_basis() {
        let spec = KernelSpec::matern(0.5, 1.0).unwrap();
        let sites = DataSiteSet::new(1, vec![0.4], BoundingBox::unit_cube(1)).unwrap();
        let c = DenseMatrix::from_diagonal(&[1.0 / spec.value_at_zero()]);
        let ev = evaluate_basis(&c, &spec, &sites, &[0.4]).unwrap();
        assert_eq!(ev.values[(0, 0)], 1.0);
    }

    #[test]
    fn newton_basis_zeros_and_gramian() {
        let (spec, sites, a) = system(3, 6, 0.0);
        let c = newton_basis(&a).unwrap();
        let ev = evaluate_basis(&c, &spec, &sites, sites.coords()).unwrap();
        assert!(ev.values[(0, 1)].abs() < 1e-8);
        assert!(ev.values[(0, 2)].abs() < 1e-8 && ev.values[(1, 2)].abs() < 1e-8);

        let (spec, sites, a) = system(120, 7, 0.12);
        let c = newton_basis(&a).unwrap();
        for i in 0..120 {
            for j in 0..i {
                assert_eq!(c[(i, j)], 0.0);
            }
        }
        assert!(duality_defect(&c, a.matrix(), &c) < 1e-8);
        // With λ > 0 the zeros hold for the regularized system: (A + λI)C = L.
        let ac = a.matrix().matmul(&c);
        for i in 0..120 {
            for j in i + 1..120 {
                assert!(ac[(i, j)].abs() < 1e-8);
            }
        }
        let _ = (spec, sites);
    }

    #[test]
    fn newton_single_site() {
        let a = KernelMatrix::from_parts(DenseMatrix::from_diagonal(&[1.5]), 0.5);
        let c = newton_basis(&a).unwrap();
        assert!((c[(0, 0)] * 1.5 * c[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interpolant_reproduces_translates_and_constants() {
        let (spec, sites, a) = system(100, 8, 0.0);
        let inv = lagrange_coefficients(&a).unwrap();
        let data: Vec<f64> = (0..100).map(|j| spec.between(sites.point(j), sites.point(0))).collect();
        let q = generate_uniform(40, 2, 9);
        let s = interpolant(&inv, &spec, &sites, &data, q.coords()).unwrap();
        for (k, v) in s.iter().enumerate() {
            assert!((v - spec.between(q.point(k), sites.point(0))).abs() < 1e-8);
        }
        let ones = vec![1.0; 100];
        let at_sites = interpolant(&inv, &spec, &sites, &ones, sites.coords()).unwrap();
        assert!(at_sites.iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn heavy_regularization_shrinks_interpolant() {
        let (spec, sites, a) = system(80, 10, 0.0);
        let (_, _, heavy) = system(80, 10, 1e3 * 80.0);
        let data: Vec<f64> = sites.points().map(|p| (3.0 * p[0]).sin() + p[1]).collect();
        let norm = |c: &DenseMatrix| {
            let v = interpolant(c, &spec, &sites, &data, sites.coords()).unwrap();
            v.iter().map(|x| x * x).sum::<f64>().sqrt()
        };
        let plain = norm(&lagrange_coefficients(&a).unwrap());
        let shrunk = norm(&lagrange_coefficients(&heavy).unwrap());
        assert!(shrunk < 1e-2 * plain);
    }

    #[test]
    fn inverse_entries_decay_with_distance() {
        let spec = KernelSpec::matern(0.5, 0.1).unwrap();
        let sites = generate_uniform(2000, 2, 12);
        let a = assemble(&spec, &sites, 0.0).unwrap();
        let inv = lagrange_coefficients(&a).unwrap();
        let h = crate::pointset::geometry_summary(&sites, 128).unwrap().fill_distance_est;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for j in 0..2000 {
            for k in sites.neighbors_within(j, 10.0 * h) {
                if k != j && inv[(j, k)] != 0.0 {
                    xs.push(sites.distance(j, k));
                    ys.push(inv[(j, k)].abs().ln());
                }
            }
        }
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let r = cov / (vx * vy).sqrt();
        assert!(r <= -0.5, "correlation {r}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn sparse_and_dense_coefficients_agree(seed in 0u64..1000) {
            let (spec, sites, a) = system(25, seed, 0.025);
            let inv = lagrange_coefficients(&a).unwrap();
            let sparse = SparseMatrix::from_dense_filtered(&inv, |i, j, _| (i + j) % 3 != 0);
            let dense = sparse.to_dense();
            let q = generate_uniform(6, 2, seed + 1);
            let a1 = evaluate_basis(&sparse, &spec, &sites, q.coords()).unwrap();
            let a2 = evaluate_basis(&dense, &spec, &sites, q.coords()).unwrap();
            prop_assert!(a1.values.sub(&a2.values).max_abs() < 1e-12 * a2.values.max_abs().max(1.0));
        }
    }
}
