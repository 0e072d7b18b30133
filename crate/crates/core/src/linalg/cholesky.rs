use super::dense::{axpy, dot, DenseMatrix};
use crate::error::{Error, Result};

/// Dense Cholesky factor `M = L Lᵀ` with `L` lower triangular.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

/// Lower-triangular `L` with `L Lᵀ = m`. Only the lower triangle of `m` is read.
pub fn cholesky(m: &DenseMatrix) -> Result<DenseMatrix> {
    Cholesky::factor(m).map(Cholesky::into_factor)
}

impl Cholesky {
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.rows(), found: m.cols() });
        }
        let n = m.rows();
        let mut l = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = {
                    let li = &l.row(i)[..j];
                    let lj = &l.row(j)[..j];
                    dot(li, lj)
                };
                let v = m[(i, j)] - s;
                if i == j {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: v });
                    }
                    l[(i, i)] = v.sqrt();
                } else {
                    l[(i, j)] = v / l[(j, j)];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn factor_ref(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn into_factor(self) -> DenseMatrix {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        forward_substitute(&self.l, b)
    }

    /// Solves `Lᵀ x = y`.
    pub fn solve_lower_transpose(&self, y: &[f64]) -> Vec<f64> {
        backward_substitute_transpose(&self.l, y)
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_lower_transpose(&self.solve_lower(b))
    }

    /// `L⁻¹`, lower triangular.
    pub fn lower_inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let mut w = DenseMatrix::zeros(n, n);
        let mut row = vec![0.0; n];
        for i in 0..n {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[i] = 1.0;
            for k in 0..i {
                let lik = self.l[(i, k)];
                if lik != 0.0 {
                    axpy(-lik, &w.row(k)[..=k], &mut row[..=k]);
                }
            }
            let d = self.l[(i, i)];
            for (dst, v) in w.row_mut(i)[..=i].iter_mut().zip(&row[..=i]) {
                *dst = v / d;
            }
        }
        w
    }

    /// `M⁻¹ = L⁻ᵀ L⁻¹`, exactly symmetric.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let w = self.lower_inverse();
        let mut out = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let wk = &w.row(k)[..=k];
            for (i, &wki) in wk.iter().enumerate() {
                if wki != 0.0 {
                    axpy(wki, &wk[..=i], &mut out.row_mut(i)[..=i]);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out[(j, i)] = out[(i, j)];
            }
        }
        out
    }
}

/// Solves `L y = b` for lower-triangular row-major `L`.
pub fn forward_substitute(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut y = b.to_vec();
    for i in 0..n {
        let s = dot(&l.row(i)[..i], &y[..i]);
        y[i] = (y[i] - s) / l[(i, i)];
    }
    y
}

/// Solves `Lᵀ x = y` for lower-triangular row-major `L`.
pub fn backward_substitute_transpose(l: &DenseMatrix, y: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(y.len(), n);
    let mut x = y.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[(i, i)];
        let xi = x[i];
        if xi != 0.0 {
            axpy(-xi, &l.row(i)[..i], &mut x[..i]);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut m = g.transpose().matmul(&g);
        m.add_diagonal(n as f64 * 0.1);
        m
    }

    #[test]
    fn diagonal_factor() {
        let m = DenseMatrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        assert_eq!(l, DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap());
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = (-1.0_f64).exp();
        let m = DenseMatrix::from_rows(&[vec![1.0, a], vec![a, 1.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        assert!((l[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((l[(1, 0)] - a).abs() < 1e-15);
        assert!((l[(1, 1)] - (1.0 - a * a).sqrt()).abs() < 1e-15);
        assert_eq!(l[(0, 1)], 0.0);
    }

    #[test]
    fn reconstruction_random_spd() {
        for &n in &[5, 50, 200] {
            let m = random_spd(n, n as u64);
            let l = cholesky(&m).unwrap();
            let r = l.matmul(&l.transpose()).sub(&m).frobenius_norm() / m.frobenius_norm();
            assert!(r <= 1e-12, "n={n} rel={r}");
        }
    }

    #[test]
    fn rejects_indefinite() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&m), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
    }

    #[test]
    fn solve_and_inverse() {
        let m = random_spd(30, 7);
        let ch = Cholesky::factor(&m).unwrap();
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = ch.solve(&b);
        let r = m.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-10);
        }
        let inv = ch.inverse();
        assert!(inv.is_symmetric());
        assert!(m.matmul(&inv).identity_defect() < 1e-10);
    }
}
