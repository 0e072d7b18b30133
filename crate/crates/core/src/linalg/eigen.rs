//! Symmetric eigendecomposition by Householder tridiagonalization followed by
//! the implicit QL iteration, plus spectral functions of SPD matrices built on it.

use super::dense::{axpy, dot, DenseMatrix};
use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 64;

/// `M = V diag(values) Vᵀ`, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: DenseMatrix,
}

pub fn sym_eig(m: &DenseMatrix) -> Result<SymmetricEigen> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.rows(), found: m.cols() });
    }
    let n = m.rows();
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
    }
    let mut v = m.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    // QL rotates pairs of eigenvector columns; keep them as contiguous rows.
    let mut w = v.transpose();
    tridiagonal_ql(&mut w, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| w[(order[j], i)]);
    Ok(SymmetricEigen { values, vectors })
}

impl SymmetricEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(w)) Vᵀ`, symmetric by construction.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.dim();
        let vt = self.vectors.transpose();
        let fw: Vec<f64> = self.values.iter().map(|&w| f(w)).collect();
        let mut out = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let vk = vt.row(k);
            for i in 0..n {
                let c = fw[k] * vk[i];
                if c != 0.0 {
                    axpy(c, &vk[i..], &mut out.row_mut(i)[i..]);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out[(i, j)] = out[(j, i)];
            }
        }
        out
    }

    /// `V diag(f(w)) Vᵀ e_col`: one column of a spectral function.
    pub fn map_spectrum_column(&self, col: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let c: Vec<f64> = self.vectors.row(col).iter().zip(&self.values).map(|(v, &w)| f(w) * v).collect();
        (0..self.dim()).map(|i| dot(self.vectors.row(i), &c)).collect()
    }

    /// Fails when the smallest eigenvalue is not safely positive.
    pub fn ensure_positive(&self) -> Result<()> {
        let n = self.dim();
        let top = self.values.first().copied().unwrap_or(0.0).abs();
        let floor = n as f64 * f64::EPSILON * top;
        for (k, &w) in self.values.iter().enumerate() {
            if !(w > floor) {
                return Err(Error::NotPositiveDefinite { pivot: k, value: w });
            }
        }
        Ok(())
    }
}

/// Symmetric square root `S` with `S S = M`.
pub fn sqrt_spd(m: &DenseMatrix) -> Result<DenseMatrix> {
    let eig = sym_eig(m)?;
    eig.ensure_positive()?;
    Ok(eig.map_spectrum(f64::sqrt))
}

/// `M^γ` for SPD `M`.
pub fn spd_power(m: &DenseMatrix, gamma: f64) -> Result<DenseMatrix> {
    let eig = sym_eig(m)?;
    eig.ensure_positive()?;
    Ok(eig.map_spectrum(|w| w.powf(gamma)))
}

// Householder reduction to tridiagonal form; `v` is overwritten with the
// accumulated orthogonal transformation (columns).
fn tridiagonalize(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e). `w` holds eigenvectors as rows.
fn tridiagonal_ql(w: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence { iterations: sweeps });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(w, i, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_rows(w: &mut DenseMatrix, i: usize, c: f64, s: f64) {
    let cols = w.cols();
    let data = w.as_mut_slice();
    let (lo, hi) = data.split_at_mut((i + 1) * cols);
    let ri = &mut lo[i * cols..];
    let rn = &mut hi[..cols];
    for (a, b) in ri.iter_mut().zip(rn.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64, spd: bool) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        if spd {
            let mut m = g.transpose().matmul(&g);
            m.add_diagonal(0.5);
            m
        } else {
            DenseMatrix::from_fn(n, n, |i, j| g[(i, j)] + g[(j, i)])
        }
    }

    fn reconstruct(e: &SymmetricEigen) -> DenseMatrix {
        e.map_spectrum(|w| w)
    }

    #[test]
    fn identity_spectrum() {
        let e = sym_eig(&DenseMatrix::identity(6)).unwrap();
        assert!(e.values.iter().all(|&w| (w - 1.0).abs() < 1e-15));
    }

    #[test]
    fn diagonal_sorted_descending() {
        let e = sym_eig(&DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn one_by_one() {
        let e = sym_eig(&DenseMatrix::from_diagonal(&[4.0])).unwrap();
        assert_eq!(e.values, vec![4.0]);
        assert_eq!(e.vectors[(0, 0)].abs(), 1.0);
    }

    #[test]
    fn random_reconstruction_and_orthogonality() {
        for &(n, spd) in &[(5, true), (50, false), (100, true), (500, true)] {
            let m = random_sym(n, n as u64 + 11, spd);
            let e = sym_eig(&m).unwrap();
            let rec = reconstruct(&e).sub(&m).frobenius_norm() / m.frobenius_norm();
            assert!(rec <= 1e-10, "n={n} reconstruction {rec}");
            let vtv = e.vectors.transpose().matmul(&e.vectors);
            let orth = vtv.identity_defect();
            assert!(orth <= 1e-10 * (n as f64).sqrt(), "n={n} orthogonality {orth}");
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn sqrt_of_diagonal() {
        let s = sqrt_spd(&DenseMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert!((s[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((s[(1, 1)] - 3.0).abs() < 1e-14);
        assert!(s[(0, 1)].abs() < 1e-14);
        let i = sqrt_spd(&DenseMatrix::identity(4)).unwrap();
        assert!(i.identity_defect() < 1e-14);
    }

    #[test]
    fn sqrt_squares_back_and_is_symmetric() {
        let m = random_sym(60, 3, true);
        let s = sqrt_spd(&m).unwrap();
        assert!(s.is_symmetric());
        let err = s.matmul(&s).sub(&m).frobenius_norm() / m.frobenius_norm();
        assert!(err <= 1e-10, "{err}");
        let eig = sym_eig(&s).unwrap();
        assert!(eig.values.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(sqrt_spd(&m), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn spectral_column_matches_full_map() {
        let m = random_sym(20, 9, true);
        let e = sym_eig(&m).unwrap();
        let full = e.map_spectrum(|w| w.powf(-0.5));
        for col in [0, 7, 19] {
            let c = e.map_spectrum_column(col, |w| w.powf(-0.5));
            for i in 0..20 {
                assert!((c[i] - full[(i, col)]).abs() < 1e-12);
            }
        }
    }
}
