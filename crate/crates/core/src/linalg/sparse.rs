use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Compressed sparse column storage.
///
/// Row indices within each column are strictly increasing; there are no
/// duplicate `(row, col)` pairs and explicit zeros are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, col_ptr: vec![0; n_cols + 1], row_idx: vec![], values: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    // Caller guarantees the CSC invariants.
    pub(crate) fn from_raw_csc(
        n_rows: usize,
        n_cols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(col_ptr.len(), n_cols + 1);
        debug_assert_eq!(row_idx.len(), values.len());
        Self { n_rows, n_cols, col_ptr, row_idx, values }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are rejected.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &t {
            if i >= n_rows || j >= n_cols {
                return Err(Error::InvalidInput(format!(
                    "entry ({i}, {j}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
        }
        t.sort_by_key(|&(i, j, _)| (j, i));
        let mut col_ptr = vec![0usize; n_cols + 1];
        let mut row_idx = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        for (k, &(i, j, v)) in t.iter().enumerate() {
            if k > 0 && t[k - 1].0 == i && t[k - 1].1 == j {
                return Err(Error::InvalidInput(format!("duplicate entry ({i}, {j})")));
            }
            col_ptr[j + 1] += 1;
            row_idx.push(i);
            values.push(v);
        }
        for j in 0..n_cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        Ok(Self { n_rows, n_cols, col_ptr, row_idx, values })
    }

    /// Builds from per-column `(row, value)` lists already sorted by row.
    pub fn from_sorted_columns(n_rows: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n_cols = columns.len();
        let nnz = columns.iter().map(Vec::len).sum();
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        col_ptr.push(0);
        for (j, col) in columns.into_iter().enumerate() {
            let mut prev: Option<usize> = None;
            for (i, v) in col {
                if i >= n_rows || prev.is_some_and(|p| p >= i) {
                    return Err(Error::InvalidInput(format!("column {j} rows not sorted or out of range")));
                }
                prev = Some(i);
                row_idx.push(i);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self { n_rows, n_cols, col_ptr, row_idx, values })
    }

    /// Keeps entries of `m` for which `keep(i, j, value)` holds.
    pub fn from_dense_filtered(m: &DenseMatrix, mut keep: impl FnMut(usize, usize, f64) -> bool) -> Self {
        let mut col_ptr = vec![0usize];
        let mut row_idx = vec![];
        let mut values = vec![];
        for j in 0..m.cols() {
            for i in 0..m.rows() {
                let v = m[(i, j)];
                if keep(i, j, v) {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self { n_rows: m.rows(), n_cols: m.cols(), col_ptr, row_idx, values }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        Self::from_dense_filtered(m, |_, _, v| v != 0.0)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for j in 0..self.n_cols {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries divided by `n_rows * n_cols`.
    pub fn compression_rate(&self) -> f64 {
        self.nnz() as f64 / (self.n_rows as f64 * self.n_cols as f64)
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (rows, vals) = self.column(j);
        rows.binary_search(&i).ok().map(|k| vals[k])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_cols).flat_map(move |j| {
            let (rows, vals) = self.column(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_rows + 1];
        for &i in &self.row_idx {
            counts[i + 1] += 1;
        }
        for i in 0..self.n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.n_cols {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                row_idx[next[i]] = j;
                values[next[i]] = v;
                next[i] += 1;
            }
        }
        SparseMatrix { n_rows: self.n_cols, n_cols: self.n_rows, col_ptr: counts, row_idx, values }
    }

    /// `S v`
    pub fn spmv(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_cols, "spmv dimension mismatch");
        let mut y = vec![0.0; self.n_rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj == 0.0 {
                continue;
            }
            let (rows, vals) = self.column(j);
            for (&i, &a) in rows.iter().zip(vals) {
                y[i] += a * vj;
            }
        }
        y
    }

    /// `Sᵀ v`
    pub fn transpose_spmv(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_rows, "transpose_spmv dimension mismatch");
        (0..self.n_cols)
            .map(|j| {
                let (rows, vals) = self.column(j);
                rows.iter().zip(vals).map(|(&i, &a)| a * v[i]).sum()
            })
            .collect()
    }

    /// No stored entry below the diagonal.
    pub fn is_upper_triangular(&self) -> bool {
        (0..self.n_cols).all(|j| self.column(j).0.iter().all(|&i| i <= j))
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.n_cols).all(|j| self.column(j).0.iter().all(|&i| i >= j))
    }

    /// Solves `L x = b` for lower-triangular `self` (diagonal stored first in each column).
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_square(b.len())?;
        let mut x = b.to_vec();
        for j in 0..self.n_cols {
            let (rows, vals) = self.column(j);
            let d = lower_diagonal(rows, vals, j)?;
            x[j] /= d;
            let xj = x[j];
            for (&i, &v) in rows.iter().zip(vals).skip(1) {
                x[i] -= v * xj;
            }
        }
        Ok(x)
    }

    /// Solves `Lᵀ x = b` for lower-triangular `self`.
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_square(b.len())?;
        let mut x = b.to_vec();
        for j in (0..self.n_cols).rev() {
            let (rows, vals) = self.column(j);
            let d = lower_diagonal(rows, vals, j)?;
            let s: f64 = rows.iter().zip(vals).skip(1).map(|(&i, &v)| v * x[i]).sum();
            x[j] = (x[j] - s) / d;
        }
        Ok(x)
    }

    /// Solves `U x = b` for upper-triangular `self` (diagonal stored last in each column).
    pub fn solve_upper(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_square(b.len())?;
        let mut x = b.to_vec();
        for j in (0..self.n_cols).rev() {
            let (rows, vals) = self.column(j);
            let k = rows.len();
            if k == 0 || rows[k - 1] != j || vals[k - 1] == 0.0 {
                return Err(Error::SingularDiagonal { index: j });
            }
            x[j] /= vals[k - 1];
            let xj = x[j];
            for (&i, &v) in rows[..k - 1].iter().zip(&vals[..k - 1]) {
                x[i] -= v * xj;
            }
        }
        Ok(x)
    }

    fn check_square(&self, len: usize) -> Result<()> {
        if self.n_rows != self.n_cols {
            return Err(Error::DimensionMismatch { expected: self.n_rows, found: self.n_cols });
        }
        if len != self.n_rows {
            return Err(Error::DimensionMismatch { expected: self.n_rows, found: len });
        }
        Ok(())
    }
}

fn lower_diagonal(rows: &[usize], vals: &[f64], j: usize) -> Result<f64> {
    match rows.first() {
        Some(&r) if r == j && vals[0] != 0.0 => Ok(vals[0]),
        _ => Err(Error::SingularDiagonal { index: j }),
    }
}

/// Solves `L x = v` for a sparse lower-triangular factor.
pub fn sparse_triangular_solve(l: &SparseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    l.solve_lower(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, density: f64, seed: u64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = vec![];
        for j in 0..n {
            for i in 0..n {
                if rng.gen::<f64>() < density {
                    t.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn identity_spmv() {
        let v = vec![1.0, -2.0, 3.5];
        assert_eq!(SparseMatrix::identity(3).spmv(&v), v);
    }

    #[test]
    fn spmv_matches_dense() {
        let s = random_sparse(100, 0.05, 1);
        let d = s.to_dense();
        let v: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).cos()).collect();
        let a = s.spmv(&v);
        let b = d.matvec(&v);
        let diff = a.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-12);
        let at = s.transpose_spmv(&v);
        let bt = d.transpose_matvec(&v);
        let diff = at.iter().zip(&bt).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-12);
        assert_eq!(s.transpose().to_dense(), d.transpose());
    }

    #[test]
    fn empty_columns_give_zero() {
        let s = SparseMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (2, 0, 1.0)]).unwrap();
        let y = s.spmv(&[1.0, 5.0, 7.0]);
        assert_eq!(y, vec![2.0, 0.0, 1.0]);
        let yt = s.transpose_spmv(&[1.0, 1.0, 1.0]);
        assert_eq!(yt, vec![3.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn triangular_solves() {
        let l = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (1, 0, 1.0), (2, 0, -1.0), (1, 1, 4.0), (2, 2, 0.5)],
        )
        .unwrap();
        let b = vec![2.0, 6.0, 1.0];
        let x = sparse_triangular_solve(&l, &b).unwrap();
        let r = l.spmv(&x);
        assert!(r.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-14));
        let xt = l.solve_lower_transpose(&b).unwrap();
        let rt = l.transpose_spmv(&xt);
        assert!(rt.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-14));
        let u = l.transpose();
        let xu = u.solve_upper(&b).unwrap();
        assert_eq!(xu, xt);
    }

    #[test]
    fn missing_diagonal_is_singular() {
        let l = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(matches!(l.solve_lower(&[1.0, 1.0]), Err(Error::SingularDiagonal { index: 1 })));
    }

    #[test]
    fn compression_rate_counts_stored_entries() {
        let s = SparseMatrix::identity(4);
        assert_eq!(s.compression_rate(), 0.25);
    }
}
