//! Sparse Cholesky factorization (up-looking, elimination-tree driven) with a
//! pluggable fill-reducing ordering.

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Fill-reducing symmetric permutation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillOrdering {
    Natural,
    #[default]
    MinimumDegree,
}

impl FillOrdering {
    /// Returns `perm` with `perm[new] = old`.
    pub fn compute(self, a: &SparseMatrix) -> Vec<usize> {
        match self {
            FillOrdering::Natural => (0..a.n_cols()).collect(),
            FillOrdering::MinimumDegree => minimum_degree(a),
        }
    }
}

/// Greedy minimum-degree ordering on the explicit elimination graph.
/// Ties are broken by the smaller vertex index.
///
/// The graph is kept as one adjacency bitset per vertex, `N²/8` bytes in total.
pub fn minimum_degree(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_cols();
    let words = n.div_ceil(64);
    let mut adj = vec![0u64; n * words];
    let set = |adj: &mut [u64], i: usize, j: usize| adj[i * words + j / 64] |= 1 << (j % 64);
    for (i, j, _) in a.triplets() {
        if i != j {
            set(&mut adj, i, j);
            set(&mut adj, j, i);
        }
    }
    let popcount = |row: &[u64]| row.iter().map(|w| w.count_ones() as usize).sum::<usize>();
    let mut degree: Vec<usize> = (0..n).map(|v| popcount(&adj[v * words..(v + 1) * words])).collect();
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut row_v = vec![0u64; words];
    for _ in 0..n {
        let v = (0..n).filter(|&u| alive[u]).min_by_key(|&u| (degree[u], u)).expect("a vertex remains");
        alive[v] = false;
        order.push(v);
        row_v.copy_from_slice(&adj[v * words..(v + 1) * words]);
        for (w, &bits) in row_v.iter().enumerate() {
            let mut bits = bits;
            while bits != 0 {
                let u = w * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let row_u = &mut adj[u * words..(u + 1) * words];
                for (x, y) in row_u.iter_mut().zip(&row_v) {
                    *x |= y;
                }
                row_u[u / 64] &= !(1 << (u % 64));
                row_u[v / 64] &= !(1 << (v % 64));
                degree[u] = popcount(row_u);
            }
        }
    }
    order
}

/// `P A Pᵀ = L Lᵀ` with `L` sparse lower triangular.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    perm: Vec<usize>,
    l: SparseMatrix,
}

impl SparseCholesky {
    /// Factorizes the symmetric matrix `a` (both triangles stored, only the
    /// upper triangle of the permuted matrix is read).
    pub fn factor(a: &SparseMatrix, ordering: FillOrdering) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch { expected: a.n_rows(), found: a.n_cols() });
        }
        let perm = ordering.compute(a);
        Self::factor_with_permutation(a, perm)
    }

    pub fn factor_with_permutation(a: &SparseMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n_cols();
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: perm.len() });
        }
        let mut pinv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || pinv[old] != usize::MAX {
                return Err(Error::InvalidInput("ordering is not a permutation".into()));
            }
            pinv[old] = new;
        }

        // Upper triangle of the permuted matrix, column-wise.
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in a.triplets() {
            let (pi, pj) = (pinv[i], pinv[j]);
            if pi <= pj {
                cols[pj].push((pi, v));
            }
        }
        for c in cols.iter_mut() {
            c.sort_by_key(|&(i, _)| i);
        }

        let parent = etree(&cols);

        // Symbolic pass: column counts of L.
        let mut mark = vec![usize::MAX; n];
        let mut stack = vec![0usize; n];
        let mut pattern = vec![0usize; n];
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(&cols[k], k, &parent, &mut mark, &mut stack, &mut pattern);
            for &i in &pattern[top..] {
                counts[i] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + counts[k];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next: Vec<usize> = col_ptr[..n].to_vec();

        // Numeric up-looking pass: row k of L from a sparse triangular solve.
        mark.iter_mut().for_each(|m| *m = usize::MAX);
        let mut x = vec![0.0; n];
        for k in 0..n {
            let top = ereach(&cols[k], k, &parent, &mut mark, &mut stack, &mut pattern);
            for &(i, v) in &cols[k] {
                x[i] = v;
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &pattern[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: k, value: d });
            }
            let p = next[k];
            next[k] += 1;
            row_idx[p] = k;
            values[p] = d.sqrt();
        }

        let l = SparseMatrix::from_raw_csc(n, n, col_ptr, row_idx, values);
        Ok(Self { perm, l })
    }

    pub fn factor_matrix(&self) -> &SparseMatrix {
        &self.l
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn factor_nnz(&self) -> usize {
        self.l.nnz()
    }

    /// Stored factor entries divided by N².
    pub fn factor_compression_rate(&self) -> f64 {
        self.l.compression_rate()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.perm.len();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        let pb: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        let y = self.l.solve_lower(&pb)?;
        let z = self.l.solve_lower_transpose(&y)?;
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = z[new];
        }
        Ok(x)
    }
}

fn etree(upper_cols: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = upper_cols.len();
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for (k, col) in upper_cols.iter().enumerate() {
        for &(start, _) in col {
            let mut i = start;
            while i != usize::MAX && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == usize::MAX {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }
    parent
}

// Nonzero pattern of row k of L (excluding the diagonal), written to
// pattern[top..n] in topological order. `mark` uses k as the visit stamp.
fn ereach(
    col: &[(usize, f64)],
    k: usize,
    parent: &[usize],
    mark: &mut [usize],
    stack: &mut [usize],
    pattern: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    for &(start, _) in col {
        if start > k {
            continue;
        }
        let mut i = start;
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
            if i == usize::MAX {
                break;
            }
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            pattern[top] = stack[len];
        }
    }
    top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cholesky::Cholesky;
    use crate::linalg::dense::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse_spd(n: usize, density: f64, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                if rng.gen::<f64>() < density {
                    let v = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        for i in 0..n {
            let row_sum: f64 = (0..n).map(|j| m[(i, j)].abs()).sum();
            m[(i, i)] = row_sum + 1.0;
        }
        m
    }

    #[test]
    fn matches_dense_solve_for_both_orderings() {
        let d = random_sparse_spd(80, 0.06, 4);
        let s = SparseMatrix::from_dense(&d);
        let b: Vec<f64> = (0..80).map(|i| 1.0 + (i % 7) as f64).collect();
        let dense = Cholesky::factor(&d).unwrap().solve(&b);
        for ord in [FillOrdering::Natural, FillOrdering::MinimumDegree] {
            let f = SparseCholesky::factor(&s, ord).unwrap();
            assert!(f.factor_matrix().is_lower_triangular());
            let x = f.solve(&b).unwrap();
            for (a, e) in x.iter().zip(&dense) {
                assert!((a - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn natural_order_factor_equals_dense_factor() {
        let d = random_sparse_spd(30, 0.2, 8);
        let f = SparseCholesky::factor(&SparseMatrix::from_dense(&d), FillOrdering::Natural).unwrap();
        let l = Cholesky::factor(&d).unwrap().into_factor();
        let ls = f.factor_matrix().to_dense();
        assert!(ls.sub(&l).max_abs() < 1e-12);
    }

    #[test]
    fn minimum_degree_reduces_fill_on_arrow_matrix() {
        // Arrow pointing up-left: natural order fills completely.
        let n = 40;
        let mut d = DenseMatrix::identity(n);
        for i in 1..n {
            d[(0, i)] = 0.1;
            d[(i, 0)] = 0.1;
            d[(i, i)] = 2.0;
        }
        let s = SparseMatrix::from_dense(&d);
        let nat = SparseCholesky::factor(&s, FillOrdering::Natural).unwrap();
        let md = SparseCholesky::factor(&s, FillOrdering::MinimumDegree).unwrap();
        assert_eq!(nat.factor_nnz(), n * (n + 1) / 2);
        assert_eq!(md.factor_nnz(), 2 * n - 1);
    }

    #[test]
    fn indefinite_is_reported() {
        let d = DenseMatrix::from_rows(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap();
        let r = SparseCholesky::factor(&SparseMatrix::from_dense(&d), FillOrdering::Natural);
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })));
    }
}
