use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kdtree::{distance, KdTree};
use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn unit_cube(dim: usize) -> Self {
        Self { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    /// Tight box around `coords` (interpreted as points of dimension `dim`).
    pub fn around(dim: usize, coords: &[f64]) -> Self {
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        for p in coords.chunks_exact(dim) {
            for d in 0..dim {
                lower[d] = lower[d].min(p[d]);
                upper[d] = upper[d].max(p[d]);
            }
        }
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lower.iter().zip(&self.upper)).all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn diameter(&self) -> f64 {
        distance(&self.lower, &self.upper)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Ordered set of distinct data sites in `R^d`, all inside `domain`.
#[derive(Debug, Clone)]
pub struct DataSiteSet {
    dim: usize,
    coords: Vec<f64>,
    domain: BoundingBox,
    index: OnceLock<KdTree>,
}

impl PartialEq for DataSiteSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.coords == other.coords && self.domain == other.domain
    }
}

impl DataSiteSet {
    /// Validates dimension, finiteness, containment in `domain` and distinctness.
    pub fn new(dim: usize, coords: Vec<f64>, domain: BoundingBox) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not form a nonempty set of {dim}-dimensional points",
                coords.len()
            )));
        }
        if domain.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: domain.dim() });
        }
        for (i, p) in coords.chunks_exact(dim).enumerate() {
            if p.iter().any(|v| !v.is_finite()) || !domain.contains(p) {
                return Err(Error::PointOutsideDomain { index: i });
            }
        }
        let n = coords.len() / dim;
        let mut order: Vec<usize> = (0..n).collect();
        let pt = |i: usize| &coords[i * dim..(i + 1) * dim];
        order.sort_by(|&a, &b| {
            pt(a)
                .iter()
                .zip(pt(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in order.windows(2) {
            if pt(w[0]) == pt(w[1]) {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(Error::DuplicatePoints { first: a, second: b });
            }
        }
        Ok(Self { dim, coords, domain, index: OnceLock::new() })
    }

    /// Sites whose domain is their own bounding box.
    pub fn with_bounding_domain(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        let domain = BoundingBox::around(dim, &coords);
        Self::new(dim, coords, domain)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &BoundingBox {
        &self.domain
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(self.point(i), self.point(j))
    }

    pub(crate) fn kd_tree(&self) -> &KdTree {
        self.index.get_or_init(|| KdTree::build(self.dim, &self.coords))
    }

    /// Indices `j` with `‖x_center − x_j‖₂ ≤ radius`, ascending.
    pub fn neighbors_within(&self, center_index: usize, radius: f64) -> Vec<usize> {
        let mut out = self.neighbors_of_point(self.point(center_index), radius);
        if out.binary_search(&center_index).is_err() {
            // radius < 0 or NaN: the center still belongs to its own neighborhood.
            out.push(center_index);
            out.sort_unstable();
        }
        out
    }

    /// Indices of sites within `radius` of an arbitrary point, ascending.
    pub fn neighbors_of_point(&self, p: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.kd_tree().within_radius(p, radius, &mut out);
        out.sort_unstable();
        out
    }

    /// Nearest site to `p` and its distance.
    pub fn nearest(&self, p: &[f64]) -> (usize, f64) {
        self.kd_tree().nearest(p, None).expect("site sets are nonempty")
    }

    /// Distance from site `i` to its nearest other site (`∞` for a single site).
    pub fn nearest_other_distance(&self, i: usize) -> f64 {
        self.kd_tree().nearest(self.point(i), Some(i)).map_or(f64::INFINITY, |(_, d)| d)
    }

    /// Affine map of all sites and the domain: `x ↦ (x − offset) · scale`.
    pub fn rescaled(&self, offset: &[f64], scale: f64) -> Result<Self> {
        let map = |v: &[f64]| -> Vec<f64> { v.iter().zip(offset).map(|(x, o)| (x - o) * scale).collect() };
        let coords = self.points().flat_map(map).collect();
        let domain = BoundingBox { lower: map(&self.domain.lower), upper: map(&self.domain.upper) };
        Self::new(self.dim, coords, domain)
    }

    /// Subset of sites in the given order, sharing the domain.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let coords = indices.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        Self::new(self.dim, coords, self.domain.clone())
    }
}

/// `n` i.i.d. uniform sites in `[0, 1]^dim` from a ChaCha8 stream seeded with `seed`.
pub fn generate_uniform(n: usize, dim: usize, seed: u64) -> DataSiteSet {
    assert!(n >= 1 && dim >= 1, "need at least one site and dimension one");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
    DataSiteSet::new(dim, coords, BoundingBox::unit_cube(dim))
        .expect("uniform draws in [0,1) are in-box and distinct with probability one")
}

/// `n` equidistant sites on `[a, b]`, endpoints included.
pub fn equidistant_1d(n: usize, a: f64, b: f64) -> DataSiteSet {
    assert!(n >= 1 && b > a);
    let coords = if n == 1 {
        vec![0.5 * (a + b)]
    } else {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    };
    DataSiteSet::new(1, coords, BoundingBox { lower: vec![a], upper: vec![b] }).expect("distinct by construction")
}
