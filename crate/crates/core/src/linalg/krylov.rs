//! Krylov solvers and the power-iteration norm estimator.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::{axpy, dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

/// Outcome of an iterative solve. Residuals are measured against the true
/// operator, `‖rhs − A x‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub final_absolute_residual: f64,
    pub converged: bool,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::MaxIterationsExceeded {
                iterations: self.iterations,
                residual: self.final_relative_residual,
            })
        }
    }
}

/// Identity preconditioner.
pub fn identity(x: &[f64]) -> Vec<f64> {
    x.to_vec()
}

/// Preconditioned conjugate gradients for SPD `A` and SPD preconditioner `M ≈ A⁻¹`,
/// started from zero. Stops once `‖rhs − A x‖₂ ≤ tol · ‖rhs‖₂`.
pub fn pcg<A, M>(apply_a: A, rhs: &[f64], apply_m: M, tol: f64, max_iter: usize) -> (Vec<f64>, SolveReport)
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let start = Instant::now();
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return (x, report(0, 0.0, 0.0, true, start));
    }
    let mut r = rhs.to_vec();
    let mut z = apply_m(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        let q = apply_a(&p);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            // Operator lost definiteness along p; report where we stand.
            return (x, report(it, rel, rel * b_norm, false, start));
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        rel = norm2(&r) / b_norm;
        if rel <= tol {
            let ax = apply_a(&x);
            r = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = norm2(&r) / b_norm;
            if rel <= tol {
                return (x, report(it, rel, rel * b_norm, true, start));
            }
        }
        z = apply_m(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let ax = apply_a(&x);
    let abs = norm2(&rhs.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
    (x, report(max_iter, abs / b_norm, abs, abs / b_norm <= tol, start))
}

/// Restart-free right-preconditioned GMRES, `A M y = rhs`, `x = M y`.
/// Intended for the nonsymmetric footprint inverse at desk scale.
pub fn gmres<A, M>(apply_a: A, rhs: &[f64], apply_m: M, tol: f64, max_iter: usize) -> (Vec<f64>, SolveReport)
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let start = Instant::now();
    let n = rhs.len();
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return (vec![0.0; n], report(0, 0.0, 0.0, true, start));
    }
    let mut basis: Vec<Vec<f64>> = vec![rhs.iter().map(|v| v / b_norm).collect()];
    let mut hess: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![b_norm];
    let mut steps = 0;
    for k in 0..max_iter.min(n) {
        steps = k + 1;
        let mut w = apply_a(&apply_m(&basis[k]));
        let mut h = vec![0.0; k + 2];
        for (j, v) in basis.iter().enumerate() {
            h[j] = dot(&w, v);
            axpy(-h[j], v, &mut w);
        }
        h[k + 1] = norm2(&w);
        for j in 0..k {
            let t = cs[j] * h[j] + sn[j] * h[j + 1];
            h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
            h[j] = t;
        }
        let denom = h[k].hypot(h[k + 1]);
        let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[k] / denom, h[k + 1] / denom) };
        cs.push(c);
        sn.push(s);
        let hk1 = h[k + 1];
        h[k] = c * h[k] + s * hk1;
        h[k + 1] = 0.0;
        g.push(-s * g[k]);
        g[k] *= c;
        hess.push(h);
        let happy = hk1 == 0.0;
        if !happy {
            basis.push(w.iter().map(|v| v / hk1).collect());
        }
        if g[k + 1].abs() / b_norm <= tol || happy {
            break;
        }
    }
    // Back substitution for the least-squares coefficients.
    let m = steps;
    let mut y = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for j in i + 1..m {
            s -= hess[j][i] * y[j];
        }
        y[i] = s / hess[i][i];
    }
    let mut u = vec![0.0; n];
    for (j, &yj) in y.iter().enumerate() {
        axpy(yj, &basis[j], &mut u);
    }
    let x = apply_m(&u);
    let ax = apply_a(&x);
    let abs = norm2(&rhs.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
    let rel = abs / b_norm;
    (x, report(m, rel, abs, rel <= tol, start))
}

fn report(iterations: usize, rel: f64, abs: f64, converged: bool, start: Instant) -> SolveReport {
    SolveReport {
        iterations,
        final_relative_residual: rel,
        final_absolute_residual: abs,
        converged,
        wall_time: start.elapsed(),
    }
}

/// Default seed for the power-iteration start vector.
pub const POWER_ITERATION_SEED: u64 = 0x5eed_2024;

/// Estimates `‖E‖₂` by power iteration on `EᵀE` from a fixed-seed random unit
/// start vector. Returns `‖E v‖₂` for the final unit iterate.
pub fn power_iteration_spectral_error<E, T>(apply_e: E, apply_et: T, n: usize, iters: usize) -> f64
where
    E: Fn(&[f64]) -> Vec<f64>,
    T: Fn(&[f64]) -> Vec<f64>,
{
    power_iteration_seeded(apply_e, apply_et, n, iters, POWER_ITERATION_SEED)
}

pub fn power_iteration_seeded<E, T>(apply_e: E, apply_et: T, n: usize, iters: usize, seed: u64) -> f64
where
    E: Fn(&[f64]) -> Vec<f64>,
    T: Fn(&[f64]) -> Vec<f64>,
{
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    for _ in 0..iters.max(1) {
        let w = apply_et(&apply_e(&v));
        let nw = norm2(&w);
        if nw == 0.0 || !nw.is_finite() {
            return if nw == 0.0 { 0.0 } else { f64::INFINITY };
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    norm2(&apply_e(&v))
}

/// `‖A B − I‖₂` for symmetric `A` and an approximate inverse `B` given by its
/// actions `B x` and `Bᵀ x`.
pub fn inverse_spectral_error<B, T>(a: &DenseMatrix, apply_b: B, apply_bt: T, iters: usize) -> f64
where
    B: Fn(&[f64]) -> Vec<f64>,
    T: Fn(&[f64]) -> Vec<f64>,
{
    let e = |v: &[f64]| {
        let mut w = a.matvec(&apply_b(v));
        axpy(-1.0, v, &mut w);
        w
    };
    let et = |v: &[f64]| {
        let mut w = apply_bt(&a.matvec(v));
        axpy(-1.0, v, &mut w);
        w
    };
    power_iteration_spectral_error(e, et, a.rows(), iters)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd10() -> DenseMatrix {
        let mut m = DenseMatrix::from_fn(10, 10, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()));
        m.add_diagonal(0.5);
        m
    }

    #[test]
    fn identity_operator_converges_in_one_step() {
        let b = vec![1.0, -2.0, 3.0];
        let (x, rep) = pcg(identity, &b, identity, 1e-12, 10);
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, b);
    }

    #[test]
    fn zero_rhs_is_trivially_solved() {
        let (x, rep) = pcg(identity, &[0.0, 0.0], identity, 1e-9, 10);
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn jacobi_beats_plain_cg_on_badly_scaled_diagonal() {
        let a = |x: &[f64]| vec![x[0], 1e4 * x[1]];
        let b = [1.0, 1.0];
        let (_, plain) = pcg(a, &b, identity, 1e-12, 100);
        let (_, jac) = pcg(a, &b, |x: &[f64]| vec![x[0], x[1] / 1e4], 1e-12, 100);
        assert!(plain.converged && jac.converged);
        assert!(jac.iterations < plain.iterations, "{} vs {}", jac.iterations, plain.iterations);
    }

    #[test]
    fn identity_preconditioner_reproduces_classical_cg_iterates() {
        let m = spd10();
        let b: Vec<f64> = (0..10).map(|i| (i as f64 + 1.0).sqrt()).collect();
        // Textbook CG, iterates recorded after every step.
        let mut x = vec![0.0; 10];
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let mut classical = vec![];
        for _ in 0..6 {
            let q = m.matvec(&p);
            let alpha = rr / dot(&p, &q);
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &q, &mut r);
            let rr_new = dot(&r, &r);
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + rr_new / rr * *pi;
            }
            rr = rr_new;
            classical.push(x.clone());
        }
        for (k, expect) in classical.iter().enumerate() {
            let (xk, _) = pcg(|v: &[f64]| m.matvec(v), &b, identity, 0.0, k + 1);
            for (a, e) in xk.iter().zip(expect) {
                assert!((a - e).abs() <= 1e-12 * (1.0 + e.abs()), "step {k}");
            }
        }
    }

    #[test]
    fn unconverged_reports_error() {
        let m = spd10();
        let b = vec![1.0; 10];
        let (_, rep) = pcg(|v: &[f64]| m.matvec(v), &b, identity, 1e-14, 2);
        assert!(!rep.converged);
        assert!(matches!(rep.ensure_converged(), Err(Error::MaxIterationsExceeded { iterations: 2, .. })));
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let a = DenseMatrix::from_fn(12, 12, |i, j| {
            if i == j { 4.0 } else if j == i + 1 { 1.0 } else if i == j + 2 { -0.5 } else { 0.0 }
        });
        let b: Vec<f64> = (0..12).map(|i| i as f64 - 3.0).collect();
        let (x, rep) = gmres(|v: &[f64]| a.matvec(v), &b, identity, 1e-12, 50);
        assert!(rep.converged);
        let r = a.matvec(&x);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-9));
    }

    #[test]
    fn power_iteration_on_known_operators() {
        let zero = |x: &[f64]| vec![0.0; x.len()];
        assert_eq!(power_iteration_spectral_error(zero, zero, 4, 200), 0.0);
        let d = |x: &[f64]| vec![0.5 * x[0], 0.1 * x[1]];
        let est = power_iteration_spectral_error(d, d, 2, 200);
        assert!((est - 0.5).abs() < 1e-6);
    }

    #[test]
    fn power_iteration_matches_top_singular_value() {
        // E = U diag(s) Vᵀ with U, V rotations and gap ratio 0.9.
        let s = [2.0, 1.8, 1.0, 0.3];
        let rot = |t: f64| {
            let (c, sn) = (t.cos(), t.sin());
            DenseMatrix::from_rows(&[
                vec![c, -sn, 0.0, 0.0],
                vec![sn, c, 0.0, 0.0],
                vec![0.0, 0.0, c, sn],
                vec![0.0, 0.0, -sn, c],
            ])
            .unwrap()
        };
        let e = rot(0.3).matmul(&DenseMatrix::from_diagonal(&s)).matmul(&rot(1.1).transpose());
        let est = power_iteration_spectral_error(|x: &[f64]| e.matvec(x), |x: &[f64]| e.transpose_matvec(x), 4, 200);
        assert!((est - 2.0).abs() / 2.0 <= 1e-4, "{est}");
    }
}
