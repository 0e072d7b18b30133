//! Samplet bases on a cluster tree: construction, fast transforms, compressed
//! kernel matrices in samplet coordinates and their sparse Cholesky solve.

use std::io::Write;

use rayon::prelude::*;

use crate::bases::BasisEvaluation;
use crate::error::{Error, Result};
use crate::kernels::{cross_matrix, KernelMatrix, KernelSpec};
use crate::linalg::{Cholesky, DenseMatrix, FillOrdering, SparseCholesky, SparseMatrix};
use crate::pointset::{ClusterTree, DataSiteSet};

/// `binom(q + d, d)`: number of monomials of total degree ≤ q in d variables.
pub fn moment_count(q: usize, dim: usize) -> usize {
    (1..=dim).fold(1usize, |acc, k| acc * (q + k) / k)
}

/// Exponents of all monomials with total degree ≤ q, graded by degree.
pub fn monomial_exponents(q: usize, dim: usize) -> Vec<Vec<usize>> {
    fn fill(rest: usize, dim: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim - 1 {
            prefix.push(rest);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=rest).rev() {
            prefix.push(a);
            fill(rest - a, dim, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for degree in 0..=q {
        fill(degree, dim, &mut Vec::new(), &mut out);
    }
    out
}

#[derive(Debug, Clone)]
struct NodeBlock {
    /// Orthogonal `n_in × n_in`; leading `n_scaling` columns are scaling functions.
    q: DenseMatrix,
    n_scaling: usize,
    /// First row of this node's samplets in the transformed vector.
    offset: usize,
}

impl NodeBlock {
    fn n_in(&self) -> usize {
        self.q.rows()
    }

    fn n_samplets(&self) -> usize {
        self.n_in() - self.n_scaling
    }
}

/// One row of the samplet transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampletIndex {
    pub row: usize,
    /// `false` for the root scaling functions.
    pub is_samplet: bool,
    pub level: usize,
    /// Position within its level.
    pub k: usize,
    pub cluster: usize,
    pub support: usize,
}

/// Orthogonal samplet transform `T` with `q + 1` vanishing moments.
#[derive(Debug, Clone)]
pub struct SampletTransform {
    tree: ClusterTree,
    q: usize,
    dim: usize,
    m_q: usize,
    blocks: Vec<NodeBlock>,
    root_scaling: usize,
    index: Vec<SampletIndex>,
}

/// Full Householder QR of an `n × m` matrix: returns `Q` (`n × n`) and `|R_kk|`.
fn householder_qr(mut a: DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let (n, m) = (a.rows(), a.cols());
    let steps = m.min(n);
    let mut reflectors: Vec<(usize, Vec<f64>)> = Vec::with_capacity(steps);
    let mut rdiag = Vec::with_capacity(steps);
    for k in 0..steps {
        let norm = (k..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            rdiag.push(0.0);
            continue;
        }
        let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        rdiag.push(norm);
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vn);
        for j in k..m {
            let s: f64 = (k..n).map(|i| v[i - k] * a[(i, j)]).sum();
            for i in k..n {
                a[(i, j)] -= 2.0 * s * v[i - k];
            }
        }
        reflectors.push((k, v));
    }
    let mut q = DenseMatrix::identity(n);
    for (k, v) in reflectors.iter().rev() {
        for j in 0..n {
            let s: f64 = (*k..n).map(|i| v[i - k] * q[(i, j)]).sum();
            if s != 0.0 {
                for i in *k..n {
                    q[(i, j)] -= 2.0 * s * v[i - k];
                }
            }
        }
    }
    // Deterministic signs: the largest-magnitude entry of each column is positive.
    for j in 0..n {
        let mut best = 0.0_f64;
        for i in 0..n {
            if q[(i, j)].abs() > best.abs() {
                best = q[(i, j)];
            }
        }
        if best < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    (q, rdiag)
}

/// Centered, scaled monomials of a node evaluated at one point.
struct MomentBasis<'a> {
    exponents: &'a [Vec<usize>],
    center: Vec<f64>,
    inv_half_width: Vec<f64>,
    q: usize,
}

impl MomentBasis<'_> {
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let dim = x.len();
        let mut powers = vec![1.0; dim * (self.q + 1)];
        for d in 0..dim {
            let xi = (x[d] - self.center[d]) * self.inv_half_width[d];
            for p in 1..=self.q {
                powers[d * (self.q + 1) + p] = powers[d * (self.q + 1) + p - 1] * xi;
            }
        }
        for (o, alpha) in out.iter_mut().zip(self.exponents) {
            *o = alpha.iter().enumerate().map(|(d, &a)| powers[d * (self.q + 1) + a]).product();
        }
    }
}

impl SampletTransform {
    /// Bottom-up construction; `q` is the polynomial degree (q + 1 vanishing moments).
    pub fn build(tree: &ClusterTree, sites: &DataSiteSet, q: usize) -> Result<Self> {
        let dim = sites.dim();
        let m_q = moment_count(q, dim);
        let exponents = monomial_exponents(q, dim);
        let nn = tree.len();
        let mut blocks: Vec<Option<NodeBlock>> = vec![None; nn];
        // Scaling functions of finished nodes as coefficients over the node's points.
        let mut scaling: Vec<Option<DenseMatrix>> = vec![None; nn];
        let perm = tree.permutation();

        for id in tree.post_order() {
            let node = tree.node(id);
            let len = node.len();
            // Input distributions as point coefficients (len × n_in).
            let input = if node.is_leaf() {
                DenseMatrix::identity(len)
            } else {
                let parts: Vec<DenseMatrix> =
                    node.children.iter().map(|&c| scaling[c].take().expect("children first")).collect();
                let n_in = parts.iter().map(DenseMatrix::cols).sum();
                let mut m = DenseMatrix::zeros(len, n_in);
                let (mut r0, mut c0) = (0, 0);
                for p in &parts {
                    for i in 0..p.rows() {
                        m.row_mut(r0 + i)[c0..c0 + p.cols()].copy_from_slice(p.row(i));
                    }
                    r0 += p.rows();
                    c0 += p.cols();
                }
                m
            };
            let n_in = input.cols();
            let basis = MomentBasis {
                exponents: &exponents,
                center: node.bbox.midpoint(),
                inv_half_width: (0..dim)
                    .map(|d| {
                        let hw = 0.5 * node.bbox.extent(d);
                        if hw > 0.0 { 1.0 / hw } else { 1.0 }
                    })
                    .collect(),
                q,
            };
            // Transposed moment matrix (n_in × m_q).
            let mut pvals = DenseMatrix::zeros(len, m_q);
            for i in 0..len {
                basis.eval(sites.point(perm[node.begin + i]), pvals.row_mut(i));
            }
            let moments_t = input.transpose().matmul(&pvals);
            let (qmat, rdiag) = householder_qr(moments_t.clone());
            let n_scaling = m_q.min(n_in);
            if n_in > m_q {
                let top = rdiag.iter().copied().fold(0.0, f64::max);
                let col_scale = moments_t.frobenius_norm();
                let tol = n_in as f64 * f64::EPSILON * col_scale.max(top);
                if rdiag.iter().any(|&r| r <= tol) {
                    return Err(Error::RankDeficientMoments { node: id });
                }
            }
            let mut qs = DenseMatrix::zeros(n_in, n_scaling);
            for i in 0..n_in {
                qs.row_mut(i).copy_from_slice(&qmat.row(i)[..n_scaling]);
            }
            scaling[id] = Some(input.matmul(&qs));
            blocks[id] = Some(NodeBlock { q: qmat, n_scaling, offset: 0 });
        }

        let mut blocks: Vec<NodeBlock> = blocks.into_iter().map(|b| b.expect("all nodes visited")).collect();
        let root_scaling = blocks[tree.root()].n_scaling;
        let mut index: Vec<SampletIndex> = (0..root_scaling)
            .map(|k| SampletIndex {
                row: k,
                is_samplet: false,
                level: 0,
                k,
                cluster: tree.root(),
                support: tree.node(tree.root()).len(),
            })
            .collect();
        let mut offset = root_scaling;
        let mut per_level: Vec<usize> = Vec::new();
        for id in tree.breadth_first() {
            let b = &mut blocks[id];
            b.offset = offset;
            let level = tree.node(id).level;
            if per_level.len() <= level {
                per_level.resize(level + 1, 0);
            }
            for _ in 0..b.n_samplets() {
                index.push(SampletIndex {
                    row: offset,
                    is_samplet: true,
                    level,
                    k: per_level[level],
                    cluster: id,
                    support: tree.node(id).len(),
                });
                per_level[level] += 1;
                offset += 1;
            }
        }
        debug_assert_eq!(offset, sites.len());
        Ok(Self { tree: tree.clone(), q, dim, m_q, blocks, root_scaling, index })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.q
    }

    pub fn vanishing_moments(&self) -> usize {
        self.q + 1
    }

    pub fn moment_count(&self) -> usize {
        self.m_q
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn root_scaling_count(&self) -> usize {
        self.root_scaling
    }

    pub fn index_map(&self) -> &[SampletIndex] {
        &self.index
    }

    /// Orthogonal two-scale block of a cluster.
    pub fn node_block(&self, id: usize) -> (&DenseMatrix, usize) {
        (&self.blocks[id].q, self.blocks[id].n_scaling)
    }

    /// `T v`.
    pub fn forward(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.len(), "vector length must equal the number of sites");
        let mut out = vec![0.0; v.len()];
        let mut up: Vec<Vec<f64>> = vec![Vec::new(); self.tree.len()];
        let perm = self.tree.permutation();
        for id in self.tree.post_order() {
            let node = self.tree.node(id);
            let input: Vec<f64> = if node.is_leaf() {
                perm[node.begin..node.end].iter().map(|&i| v[i]).collect()
            } else {
                node.children.iter().flat_map(|&c| std::mem::take(&mut up[c])).collect()
            };
            let b = &self.blocks[id];
            let y = b.q.transpose_matvec(&input);
            out[b.offset..b.offset + b.n_samplets()].copy_from_slice(&y[b.n_scaling..]);
            up[id] = y[..b.n_scaling].to_vec();
        }
        out[..self.root_scaling].copy_from_slice(&up[self.tree.root()]);
        out
    }

    /// `Tᵀ w`.
    pub fn inverse(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.len(), "vector length must equal the number of sites");
        let mut out = vec![0.0; w.len()];
        let mut down: Vec<Vec<f64>> = vec![Vec::new(); self.tree.len()];
        down[self.tree.root()] = w[..self.root_scaling].to_vec();
        let perm = self.tree.permutation();
        for id in self.tree.breadth_first() {
            let node = self.tree.node(id);
            let b = &self.blocks[id];
            let mut y = std::mem::take(&mut down[id]);
            y.extend_from_slice(&w[b.offset..b.offset + b.n_samplets()]);
            let u = b.q.matvec(&y);
            if node.is_leaf() {
                for (k, &i) in perm[node.begin..node.end].iter().enumerate() {
                    out[i] = u[k];
                }
            } else {
                let mut start = 0;
                for &c in &node.children {
                    let nc = self.blocks[c].n_scaling;
                    down[c] = u[start..start + nc].to_vec();
                    start += nc;
                }
            }
        }
        out
    }

    /// Dense `T` (row `r` = samplet or scaling distribution `r`).
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.len();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                self.forward(&e)
            })
            .collect();
        DenseMatrix::from_fn(n, n, |r, i| cols[i][r])
    }

    /// `T M Tᵀ` through the fast transform, symmetrized when `M` is symmetric.
    pub fn conjugate(&self, m: &DenseMatrix) -> DenseMatrix {
        let n = self.len();
        assert!(m.rows() == n && m.cols() == n);
        // Rows of M Tᵀ are T applied to rows of M.
        let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|r| self.forward(m.row(r))).collect();
        let x = DenseMatrix::from_fn(n, n, |c, r| rows[r][c]);
        let cols: Vec<Vec<f64>> = (0..n).into_par_iter().map(|c| self.forward(x.row(c))).collect();
        let mut y = DenseMatrix::from_fn(n, n, |r, c| cols[c][r]);
        if m.is_symmetric() {
            for i in 0..n {
                for j in 0..i {
                    let s = 0.5 * (y[(i, j)] + y[(j, i)]);
                    y[(i, j)] = s;
                    y[(j, i)] = s;
                }
            }
        }
        y
    }

    /// Writes `row,kind,j,k,cluster,support` lines.
    pub fn write_index_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["row", "kind", "j", "k", "cluster", "support"]).map_err(io)?;
        for s in &self.index {
            let kind = if s.is_samplet { "samplet" } else { "scaling" };
            w.write_record([
                s.row.to_string(),
                kind.to_string(),
                s.level.to_string(),
                s.k.to_string(),
                s.cluster.to_string(),
                s.support.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn build_transform(tree: &ClusterTree, sites: &DataSiteSet, q: usize) -> Result<SampletTransform> {
    SampletTransform::build(tree, sites, q)
}

/// How the compression threshold is interpreted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Absolute(f64),
    /// Multiple of `‖A_Σ‖_F`.
    RelativeFrobenius(f64),
}

/// Thresholded `T (A + λI) Tᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedKernelMatrix {
    pub matrix: SparseMatrix,
    /// Absolute cut-off actually applied.
    pub threshold: f64,
    pub lambda: f64,
}

impl CompressedKernelMatrix {
    pub fn compression_rate(&self) -> f64 {
        self.matrix.compression_rate()
    }
}

/// Dense `A_Σ = T (A + λI) Tᵀ`.
pub fn samplet_matrix(t: &SampletTransform, a: &KernelMatrix) -> DenseMatrix {
    t.conjugate(a.matrix())
}

/// Drops off-diagonal entries with `|A_Σ[p][q]| < threshold`; the diagonal is always kept.
pub fn threshold_samplet_matrix(a_sigma: &DenseMatrix, threshold: Threshold, lambda: f64) -> Result<CompressedKernelMatrix> {
    let cut = match threshold {
        Threshold::Absolute(t) => t,
        Threshold::RelativeFrobenius(t) => t * a_sigma.frobenius_norm(),
    };
    if !(cut >= 0.0) {
        return Err(Error::InvalidInput(format!("threshold must be nonnegative, got {cut}")));
    }
    let matrix = SparseMatrix::from_dense_filtered(a_sigma, |i, j, v| i == j || v.abs() >= cut);
    Ok(CompressedKernelMatrix { matrix, threshold: cut, lambda })
}

pub fn compress_kernel_matrix(
    t: &SampletTransform,
    a: &KernelMatrix,
    threshold: Threshold,
) -> Result<CompressedKernelMatrix> {
    threshold_samplet_matrix(&samplet_matrix(t, a), threshold, a.lambda())
}

/// Sparse Cholesky of a compressed matrix; realizes `B_Σ = Tᵀ S⁻¹ T`.
#[derive(Debug, Clone)]
pub struct SampletSolver {
    factor: SparseCholesky,
}

impl SampletSolver {
    pub fn new(s: &CompressedKernelMatrix, ordering: FillOrdering) -> Result<Self> {
        Ok(Self { factor: SparseCholesky::factor(&s.matrix, ordering)? })
    }

    /// Nonzeros of the Cholesky factor over `N²`.
    pub fn factor_compression_rate(&self) -> f64 {
        self.factor.factor_compression_rate()
    }

    pub fn factor(&self) -> &SparseCholesky {
        &self.factor
    }

    /// `S⁻¹ w` in samplet coordinates.
    pub fn solve_samplet(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.factor.solve(w)
    }

    /// `Tᵀ S⁻¹ T b` in point coordinates.
    pub fn solve(&self, t: &SampletTransform, b: &[f64]) -> Result<Vec<f64>> {
        Ok(t.inverse(&self.factor.solve(&t.forward(b))?))
    }
}

/// One-shot solve; returns the solution and the factor compression rate.
pub fn factorize_and_solve(
    t: &SampletTransform,
    s: &CompressedKernelMatrix,
    rhs: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let solver = SampletSolver::new(s, FillOrdering::default())?;
    Ok((solver.solve(t, rhs)?, solver.factor_compression_rate()))
}

/// Coefficients of the embedded samplets in kernel translates: column `r` is row `r` of `T`.
pub fn embedded_samplet_coefficients(t: &SampletTransform) -> DenseMatrix {
    t.to_dense().transpose()
}

/// `ψ_{j,k}` evaluated at flattened query points.
pub fn embedded_samplet_evaluation(
    t: &SampletTransform,
    spec: &KernelSpec,
    sites: &DataSiteSet,
    queries: &[f64],
) -> Result<BasisEvaluation> {
    let k = cross_matrix(spec, sites, queries)?;
    // K Tᵀ row by row: row q of the result is T applied to row q of K.
    let rows: Vec<Vec<f64>> = (0..k.rows()).into_par_iter().map(|q| t.forward(k.row(q))).collect();
    let values = DenseMatrix::from_fn(k.rows(), t.len(), |q, r| rows[q][r]);
    Ok(BasisEvaluation { values })
}

/// Coefficients of the dual samplets `ψ̃ = Σ [A_Σ⁻¹] ψ`, i.e. `Tᵀ A_Σ⁻¹`.
pub fn dual_samplet_coefficients(t: &SampletTransform, a: &KernelMatrix) -> Result<DenseMatrix> {
    let inv = Cholesky::factor(&samplet_matrix(t, a))?.inverse();
    let tt = embedded_samplet_coefficients(t);
    Ok(tt.matmul(&inv))
}

/// `x ↦ Tᵀ S⁻¹ T x` and its own transpose.
pub fn samplet_inverse_action<'a>(
    t: &'a SampletTransform,
    solver: &'a SampletSolver,
) -> impl Fn(&[f64]) -> Vec<f64> + 'a {
    move |x| solver.solve(t, x).expect("factor has a full diagonal")
}
