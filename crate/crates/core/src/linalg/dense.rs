use std::ops::{Index, IndexMut};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            if r.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: n, cols: m, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `y = self * x`, rows processed in parallel.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        assert_eq!(y.len(), self.rows, "matvec dimension mismatch");
        if self.cols == 0 {
            y.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        y.par_iter_mut()
            .zip(self.data.par_chunks(self.cols))
            .for_each(|(yi, row)| *yi = dot(row, x));
    }

    /// `y = self * x` for a symmetric matrix, reading only the upper triangle.
    /// Halves the memory traffic of [`matvec`](Self::matvec), which is what bounds it.
    pub fn symmetric_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, self.cols, "symmetric_matvec needs a square matrix");
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let n = self.rows;
        // Row bands of roughly equal upper-triangle area, one partial result each.
        let bands = rayon::current_num_threads().clamp(1, n.max(1));
        let total = n * (n + 1) / 2;
        let mut bounds = vec![0];
        let mut area = 0;
        for i in 0..n {
            area += n - i;
            if area * bands >= total * bounds.len() && bounds.len() < bands {
                bounds.push(i + 1);
            }
        }
        bounds.push(n);
        bounds.dedup();
        bounds
            .par_windows(2)
            .map(|w| {
                let mut y = vec![0.0; n];
                let mut i = w[0];
                while i < w[1] {
                    let rows = (w[1] - i).min(4);
                    self.symv_rows(i, rows, x, &mut y);
                    i += rows;
                }
                y
            })
            .reduce_with(|mut a, b| {
                axpy(1.0, &b, &mut a);
                a
            })
            .unwrap_or_default()
    }

    /// Upper-triangle contribution of rows `i..i + rows` (at most four) to `y`.
    fn symv_rows(&self, i: usize, rows: usize, x: &[f64], y: &mut [f64]) {
        let n = self.cols;
        // Triangle inside the block.
        for r in i..i + rows {
            y[r] += self.data[r * n + r] * x[r];
            for c in r + 1..i + rows {
                let v = self.data[r * n + c];
                y[r] += v * x[c];
                y[c] += v * x[r];
            }
        }
        let j0 = i + rows;
        if j0 >= n {
            return;
        }
        if rows < 4 {
            for r in i..i + rows {
                let row = &self.data[r * n + j0..(r + 1) * n];
                y[r] += symv_row(row, &x[j0..], &mut y[j0..], x[r]);
            }
            return;
        }
        let r0 = &self.data[i * n + j0..(i + 1) * n];
        let r1 = &self.data[(i + 1) * n + j0..(i + 2) * n];
        let r2 = &self.data[(i + 2) * n + j0..(i + 3) * n];
        let r3 = &self.data[(i + 3) * n + j0..(i + 4) * n];
        let (x0, x1, x2, x3) = (x[i], x[i + 1], x[i + 2], x[i + 3]);
        let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
        for ((((yj, &xj), &a0), (&a1, &a2)), &a3) in
            y[j0..].iter_mut().zip(&x[j0..]).zip(r0).zip(r1.iter().zip(r2)).zip(r3)
        {
            s0 += a0 * xj;
            s1 += a1 * xj;
            s2 += a2 * xj;
            s3 += a3 * xj;
            *yj += x0 * a0 + x1 * a1 + x2 * a2 + x3 * a3;
        }
        y[i] += s0;
        y[i + 1] += s1;
        y[i + 2] += s2;
        y[i + 3] += s3;
    }

    /// `y = selfᵀ * x`.
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "transpose_matvec dimension mismatch");
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, self.row(i), &mut y);
            }
        }
        y
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        if other.cols == 0 {
            return out;
        }
        out.data
            .par_chunks_mut(other.cols)
            .enumerate()
            .for_each(|(i, out_row)| {
                for (k, &a) in self.row(i).iter().enumerate() {
                    if a != 0.0 {
                        axpy(a, other.row(k), out_row);
                    }
                }
            });
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_diagonal(&mut self, s: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += s;
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm of `self - I`.
    pub fn identity_defect(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = self[(i, j)] - if i == j { 1.0 } else { 0.0 };
                s += d * d;
            }
        }
        s.sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// Rows and columns `idx` (principal submatrix when square).
    pub fn principal_submatrix(&self, idx: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(idx.len(), idx.len(), |a, b| self[(idx[a], idx[b])])
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product with independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0_f64; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for k in chunks * 8..a.len() {
        tail += a[k] * b[k];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Returns `a · x` and adds `alpha · a` to `y` in the same pass over `a`.
#[inline]
fn symv_row(a: &[f64], x: &[f64], y: &mut [f64], alpha: f64) -> f64 {
    let mut acc = [0.0_f64; 4];
    let split = a.len() - a.len() % 4;
    for ((a4, x4), y4) in a[..split].chunks_exact(4).zip(x[..split].chunks_exact(4)).zip(y[..split].chunks_exact_mut(4)) {
        for k in 0..4 {
            acc[k] += a4[k] * x4[k];
            y4[k] += alpha * a4[k];
        }
    }
    let mut tail = 0.0;
    for k in split..a.len() {
        tail += a[k] * x[k];
        y[k] += alpha * a[k];
    }
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
