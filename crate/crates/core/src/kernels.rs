//! Radial kernels and dense kernel-matrix assembly.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::pointset::{distance, DataSiteSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    MaternHalf,
    MaternThreeHalf,
    MaternFiveHalf,
    /// Arbitrary smoothness through the modified Bessel function `K_ν`.
    MaternGeneral,
    Gaussian,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::MaternHalf => "matern_half",
            Self::MaternThreeHalf => "matern_three_half",
            Self::MaternFiveHalf => "matern_five_half",
            Self::MaternGeneral => "matern_general",
            Self::Gaussian => "gaussian",
        }
    }
}

/// A radial kernel `K(x, y) = a · φ(‖x − y‖ / δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    nu: f64,
    lengthscale: f64,
    amplitude: f64,
    normalized: bool,
}

impl KernelSpec {
    /// Matérn kernel; ν ∈ {1/2, 3/2, 5/2} map to closed forms, anything else to the Bessel evaluator.
    pub fn matern(nu: f64, lengthscale: f64) -> Result<Self> {
        let family = if nu == 0.5 {
            KernelFamily::MaternHalf
        } else if nu == 1.5 {
            KernelFamily::MaternThreeHalf
        } else if nu == 2.5 {
            KernelFamily::MaternFiveHalf
        } else {
            KernelFamily::MaternGeneral
        };
        Self::new(family, nu, lengthscale)
    }

    pub fn gaussian(lengthscale: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, f64::INFINITY, lengthscale)
    }

    pub fn new(family: KernelFamily, nu: f64, lengthscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::InvalidInput(format!("lengthscale must be positive, got {lengthscale}")));
        }
        let nu = match family {
            KernelFamily::MaternHalf => 0.5,
            KernelFamily::MaternThreeHalf => 1.5,
            KernelFamily::MaternFiveHalf => 2.5,
            KernelFamily::Gaussian => f64::INFINITY,
            KernelFamily::MaternGeneral => {
                if !(nu > 0.0 && nu.is_finite()) {
                    return Err(Error::InvalidInput(format!("smoothness must be positive, got {nu}")));
                }
                if !cfg!(feature = "matern-general") || nu > MAX_GENERAL_NU {
                    return Err(Error::UnsupportedSmoothness { nu });
                }
                nu
            }
        };
        Ok(Self { family, nu, lengthscale, amplitude: 1.0, normalized: true })
    }

    /// The H¹(ℝ) kernel `½ exp(−|x − y|)`.
    pub fn h1_line() -> Self {
        Self {
            family: KernelFamily::MaternHalf,
            nu: 0.5,
            lengthscale: 1.0,
            amplitude: 0.5,
            normalized: true,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Toggles scaling so that `φ(0) = 1`; only the 5/2 closed form differs.
    pub fn with_normalization(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    /// Kernel value at distance `r ≥ 0`.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        let s = r / self.lengthscale;
        let v = match self.family {
            KernelFamily::MaternHalf => (-s).exp(),
            KernelFamily::MaternThreeHalf => (1.0 + s) * (-s).exp(),
            KernelFamily::MaternFiveHalf => {
                let raw = (3.0 + s * (3.0 + s)) * (-s).exp();
                if self.normalized { raw / 3.0 } else { raw }
            }
            KernelFamily::MaternGeneral => matern_general(self.nu, s),
            KernelFamily::Gaussian => (-s * s).exp(),
        };
        self.amplitude * v
    }

    pub fn value_at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// `K(x, y)`.
    #[inline]
    pub fn between(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval(distance(x, y))
    }
}

/// Largest smoothness accepted by the general Matérn evaluator.
pub const MAX_GENERAL_NU: f64 = 50.0;

#[cfg(feature = "matern-general")]
fn matern_general(nu: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    if s > 700.0 {
        // Below the smallest normal double for every ν of interest.
        return 0.0;
    }
    let (_, k, _, _) = puruspe::besselik(nu, s);
    let log_pref = (1.0 - nu) * std::f64::consts::LN_2 - puruspe::ln_gamma(nu) + nu * s.ln();
    let v = log_pref.exp() * k;
    // K_ν overflows only for tiny s, where the kernel equals its limit 1 to machine precision.
    if v.is_finite() { v.min(1.0) } else { 1.0 }
}

#[cfg(not(feature = "matern-general"))]
fn matern_general(_nu: f64, _s: f64) -> f64 {
    unreachable!("matern_general kernels cannot be constructed without the matern-general feature")
}

/// Checked scalar evaluation.
pub fn eval_kernel(spec: &KernelSpec, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::InvalidInput(format!("distance must be nonnegative, got {r}")));
    }
    Ok(spec.eval(r))
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Gaussian => write!(f, "gaussian:inf:{}", self.lengthscale),
            _ => write!(f, "matern:{}:{}", self.nu, self.lengthscale),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Parses `family:nu:delta`, e.g. `matern:0.5:0.1` or `gaussian:inf:0.2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |message: String| Error::Parse { line: 1, message };
        let parts: Vec<&str> = s.trim().split(':').collect();
        let [family, nu, delta] = parts.as_slice() else {
            return Err(bad(format!("expected family:nu:delta, got {s:?}")));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(format!("not a number: {t:?}")));
        let delta = num(delta)?;
        match family.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Self::gaussian(delta),
            "matern" => Self::matern(num(nu)?, delta),
            "matern_half" => Self::new(KernelFamily::MaternHalf, 0.5, delta),
            "matern_three_half" => Self::new(KernelFamily::MaternThreeHalf, 1.5, delta),
            "matern_five_half" => Self::new(KernelFamily::MaternFiveHalf, 2.5, delta),
            "matern_general" => Self::new(KernelFamily::MaternGeneral, num(nu)?, delta),
            other => Err(bad(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// Dense kernel matrix `A + λI`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    matrix: DenseMatrix,
    lambda: f64,
}

impl KernelMatrix {
    pub fn from_parts(matrix: DenseMatrix, lambda: f64) -> Self {
        Self { matrix, lambda }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.matrix
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn site_count(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.symmetric_matvec(x)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("regularization must be nonnegative, got {lambda}")))
    }
}

/// Assembles `[K(x_i, x_j)] + λI`, evaluating each pair once.
pub fn assemble(spec: &KernelSpec, sites: &DataSiteSet, lambda: f64) -> Result<KernelMatrix> {
    check_lambda(lambda)?;
    let n = sites.len();
    let mut m = DenseMatrix::zeros(n, n);
    m.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = sites.point(i);
        for j in i + 1..n {
            row[j] = spec.between(xi, sites.point(j));
        }
        row[i] = spec.value_at_zero() + lambda;
    });
    let data = m.as_mut_slice();
    for i in 1..n {
        for j in 0..i {
            data[i * n + j] = data[j * n + i];
        }
    }
    Ok(KernelMatrix { matrix: m, lambda })
}

/// Principal block `A|_S + λI` for a strictly increasing index list `S`.
pub fn assemble_restricted(
    spec: &KernelSpec,
    sites: &DataSiteSet,
    subset: &[usize],
    lambda: f64,
) -> Result<KernelMatrix> {
    check_lambda(lambda)?;
    validate_subset(subset, sites.len())?;
    Ok(KernelMatrix { matrix: restricted_block(spec, sites, subset, lambda), lambda })
}

pub(crate) fn validate_subset(subset: &[usize], n: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset("empty subset".into()));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidSubset(format!("index {bad} out of range for {n} sites")));
    }
    if subset.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSubset("indices must be strictly increasing".into()));
    }
    Ok(())
}

fn restricted_block(spec: &KernelSpec, sites: &DataSiteSet, subset: &[usize], lambda: f64) -> DenseMatrix {
    let k = subset.len();
    let mut m = DenseMatrix::zeros(k, k);
    let data = m.as_mut_slice();
    for a in 0..k {
        data[a * k + a] = spec.value_at_zero() + lambda;
        let xa = sites.point(subset[a]);
        for b in a + 1..k {
            let v = spec.between(xa, sites.point(subset[b]));
            data[a * k + b] = v;
            data[b * k + a] = v;
        }
    }
    m
}

/// Kernel values between query points (flattened, dimension of `sites`) and all sites:
/// entry `(q, j) = K(y_q, x_j)`.
pub fn cross_matrix(spec: &KernelSpec, sites: &DataSiteSet, queries: &[f64]) -> Result<DenseMatrix> {
    let dim = sites.dim();
    if queries.len() % dim != 0 {
        return Err(Error::DimensionMismatch { expected: dim, found: queries.len() % dim });
    }
    let nq = queries.len() / dim;
    let n = sites.len();
    let mut m = DenseMatrix::zeros(nq, n);
    m.as_mut_slice().par_chunks_mut(n.max(1)).enumerate().for_each(|(q, row)| {
        let y = &queries[q * dim..(q + 1) * dim];
        for (j, v) in row.iter_mut().enumerate() {
            *v = spec.between(y, sites.point(j));
        }
    });
    Ok(m)
}

/// Source of regularized principal blocks `(A + λI)|_S`, either sliced from a dense
/// matrix or assembled on demand.
pub trait LocalSystem: Sync {
    fn site_count(&self) -> usize;
    fn lambda(&self) -> f64;
    /// Block for a strictly increasing index list.
    fn principal(&self, subset: &[usize]) -> DenseMatrix;
}

impl LocalSystem for KernelMatrix {
    fn site_count(&self) -> usize {
        self.matrix.rows()
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn principal(&self, subset: &[usize]) -> DenseMatrix {
        self.matrix.principal_submatrix(subset)
    }
}

/// On-the-fly assembly of local blocks without a dense global matrix.
#[derive(Debug, Clone, Copy)]
pub struct KernelSystem<'a> {
    pub spec: &'a KernelSpec,
    pub sites: &'a DataSiteSet,
    pub lambda: f64,
}

impl LocalSystem for KernelSystem<'_> {
    fn site_count(&self) -> usize {
        self.sites.len()
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn principal(&self, subset: &[usize]) -> DenseMatrix {
        restricted_block(self.spec, self.sites, subset, self.lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cholesky, sym_eig};
    use crate::pointset::{generate_uniform, BoundingBox};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[cfg(feature = "matern-general")]
    #[test]
    fn general_matern_is_finite_at_extreme_arguments() {
        for nu in [0.3, 1.0, 7.5, MAX_GENERAL_NU] {
            let spec = KernelSpec::new(KernelFamily::MaternGeneral, nu, 1.0).unwrap();
            for r in [1e-300, 1e-40, 1e-8, 1e-3, 1.0, 50.0, 699.0, 701.0, 1e300] {
                let v = spec.eval(r);
                assert!((0.0..=1.0).contains(&v), "nu {nu} r {r}: {v}");
            }
            assert!(spec.eval(1e-40) > 1.0 - 1e-12);
        }
        assert!(matches!(
            KernelSpec::new(KernelFamily::MaternGeneral, 2.0 * MAX_GENERAL_NU, 1.0),
            Err(Error::UnsupportedSmoothness { .. })
        ));
    }

    #[test]
    fn closed_form_values() {
        let half = KernelSpec::matern(0.5, 1.0).unwrap();
        assert_eq!(half.eval(0.0), 1.0);
        assert!(close(half.eval(1.0), 0.3678794412, 1e-10));
        let three = KernelSpec::matern(1.5, 1.0).unwrap();
        assert!(close(three.eval(1.0), 0.7357588823, 1e-10));
        let five = KernelSpec::matern(2.5, 0.5).unwrap();
        let raw = 13.0 * (-2.0f64).exp();
        assert!(close(five.eval(1.0), raw / 3.0, 1e-14));
        assert!(close(five.with_normalization(false).eval(1.0), raw, 1e-14));
        assert!(close(raw, 1.7593586817, 1e-9));
        assert!(close(KernelSpec::gaussian(0.5).unwrap().eval(1.0), (-4.0f64).exp(), 1e-15));
    }

    #[test]
    fn h1_kernel_is_half_exponential() {
        let k = KernelSpec::h1_line();
        assert_eq!(k.eval(0.0), 0.5);
        assert!(close(k.eval(2.0), 0.5 * (-2.0f64).exp(), 1e-15));
    }

    #[test]
    fn closed_forms_are_monotone() {
        for nu in [0.5, 1.5, 2.5] {
            let k = KernelSpec::matern(nu, 0.3).unwrap();
            let mut prev = k.eval(0.0);
            for s in 1..=10_000 {
                let v = k.eval(10.0 * 0.3 * s as f64 / 10_000.0);
                assert!(v <= prev, "nu {nu} step {s}");
                prev = v;
            }
        }
    }

    #[cfg(feature = "matern-general")]
    #[test]
    fn general_matches_closed_forms() {
        for nu in [0.5, 1.5, 2.5] {
            let closed = KernelSpec::matern(nu, 1.0).unwrap();
            let general = KernelSpec::new(KernelFamily::MaternGeneral, nu, 1.0).unwrap();
            for r in [0.0, 1e-6, 0.01, 0.3, 1.0, 2.7, 10.0, 40.0] {
                let (a, b) = (closed.eval(r), general.eval(r));
                assert!((a - b).abs() <= 1e-10 * a.max(1e-300), "nu {nu} r {r}: {a} vs {b}");
            }
            assert_eq!(general.eval(1000.0), 0.0);
        }
    }

    #[cfg(feature = "matern-general")]
    #[test]
    fn general_nu_one_matches_reference_bessel() {
        // r·K₁(r) from scipy.special.kv(1, r) * r; for ν = 1 the prefactor is 1.
        let k = KernelSpec::matern(1.0, 1.0).unwrap();
        for (r, want) in [
            (0.1, 0.9853844780870606),
            (0.5, 0.8282205600016503),
            (1.0, 0.6019072301972346),
            (2.0, 0.2797317636330449),
            (5.0, 0.02022306722726082),
        ] {
            let got = k.eval(r);
            assert!((got - want).abs() <= 1e-9 * want, "r {r}: {got} vs {want}");
        }
    }

    #[test]
    fn spec_strings_round_trip() {
        let k: KernelSpec = "matern:0.5:0.1".parse().unwrap();
        assert_eq!(k.family(), KernelFamily::MaternHalf);
        assert_eq!(k.lengthscale(), 0.1);
        assert_eq!(k.to_string().parse::<KernelSpec>().unwrap(), k);
        let g: KernelSpec = "gaussian:inf:0.2".parse().unwrap();
        assert_eq!(g.to_string().parse::<KernelSpec>().unwrap(), g);
        assert!("matern:0.5".parse::<KernelSpec>().is_err());
        assert!("matern:0.5:-1".parse::<KernelSpec>().is_err());
        assert!("wendland:1:1".parse::<KernelSpec>().is_err());
        assert!("matern_general:0:1".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn negative_distance_is_rejected() {
        let k = KernelSpec::matern(0.5, 1.0).unwrap();
        assert!(eval_kernel(&k, -1.0).is_err());
        assert!(eval_kernel(&k, f64::NAN).is_err());
        assert_eq!(eval_kernel(&k, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn two_point_matrix() {
        let s = DataSiteSet::new(1, vec![0.0, 1.0], BoundingBox::unit_cube(1)).unwrap();
        let k = KernelSpec::matern(0.5, 1.0).unwrap();
        let a = assemble(&k, &s, 0.0).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(a.matrix().as_slice(), &[1.0, e, e, 1.0]);
        let b = assemble(&k, &s, 0.5).unwrap();
        assert_eq!(b.matrix().diagonal(), vec![1.5, 1.5]);
    }

    #[test]
    fn assembly_is_symmetric_and_factorizable() {
        let s = generate_uniform(1000, 2, 17);
        let k = KernelSpec::matern(0.5, 0.1).unwrap();
        let a = assemble(&k, &s, 1e-6 * 1000.0).unwrap();
        assert!(a.matrix().is_symmetric());
        assert!(cholesky(a.matrix()).is_ok());
    }

    #[test]
    fn restricted_equals_slice() {
        let s = generate_uniform(1000, 2, 3);
        let k = KernelSpec::matern(1.5, 0.1).unwrap();
        let full = assemble(&k, &s, 0.01).unwrap();
        let subset: Vec<usize> = (0..1000).step_by(11).take(90).collect();
        let local = assemble_restricted(&k, &s, &subset, 0.01).unwrap();
        assert_eq!(local.matrix(), &full.matrix().principal_submatrix(&subset));
        assert!(cholesky(local.matrix()).is_ok());
        assert_eq!(full.principal(&subset), *local.matrix());
        let sys = KernelSystem { spec: &k, sites: &s, lambda: 0.01 };
        assert_eq!(sys.principal(&subset), *local.matrix());
        let one = assemble_restricted(&k, &s, &[5], 0.01).unwrap();
        assert_eq!(one.matrix().as_slice(), &[1.01]);
        let small = generate_uniform(30, 2, 3);
        let all: Vec<usize> = (0..30).collect();
        assert_eq!(assemble_restricted(&k, &small, &all, 0.0).unwrap(), assemble(&k, &small, 0.0).unwrap());
    }

    #[test]
    fn invalid_subsets() {
        let s = generate_uniform(10, 2, 3);
        let k = KernelSpec::matern(0.5, 0.1).unwrap();
        assert!(matches!(assemble_restricted(&k, &s, &[], 0.0), Err(Error::InvalidSubset(_))));
        assert!(matches!(assemble_restricted(&k, &s, &[1, 1], 0.0), Err(Error::InvalidSubset(_))));
        assert!(matches!(assemble_restricted(&k, &s, &[3, 2], 0.0), Err(Error::InvalidSubset(_))));
        assert!(matches!(assemble_restricted(&k, &s, &[10], 0.0), Err(Error::InvalidSubset(_))));
    }

    #[test]
    fn unregularized_matrices_are_positive_semidefinite() {
        for (nu, seed) in [(0.5, 1), (1.5, 2), (2.5, 3)] {
            let s = generate_uniform(300, 2, seed);
            let a = assemble(&KernelSpec::matern(nu, 0.1).unwrap(), &s, 0.0).unwrap();
            let eig = sym_eig(a.matrix()).unwrap();
            let top = eig.values[0];
            assert!(eig.values.iter().all(|&w| w > -1e-8 * top));
        }
    }

    proptest! {
        #[test]
        fn cross_matrix_matches_pairwise(seed in 0u64..500) {
            let s = generate_uniform(20, 2, seed);
            let q = generate_uniform(5, 2, seed + 1);
            let k = KernelSpec::matern(1.5, 0.2).unwrap();
            let m = cross_matrix(&k, &s, q.coords()).unwrap();
            for a in 0..5 {
                for j in 0..20 {
                    prop_assert_eq!(m[(a, j)], k.between(q.point(a), s.point(j)));
                }
            }
        }
    }
}
