//! Signed-distance fitting of closed 2D curves and zero-levelset extraction.
//!
//! Shapes live in the unit square: the circle has center `(½, ½)` and
//! radius `⅓`, the star has outer radius `⅓` and inner radius `⅙`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Shape, RECONSTRUCTION_LAMBDA_FACTOR};
use super::record::ExperimentRecord;
use super::studies::{fill_distance, ms, Check};
use crate::error::{Error, Result};
use crate::kernels::{assemble, cross_matrix};
use crate::lagrange::Footprints;
use crate::linalg::{pcg, SolveReport};
use crate::pointset::{BoundingBox, DataSiteSet};
use crate::precond::build_cholesky_preconditioner;

const CENTER: [f64; 2] = [0.5, 0.5];
const RADIUS: f64 = 1.0 / 3.0;
const STAR_POINTS: usize = 5;
const STAR_INNER: f64 = RADIUS / 2.0;

/// Largest PCG iteration count accepted by the in-harness check.
pub const MAX_RECONSTRUCTION_ITERATIONS: usize = 50;

pub type Point = [f64; 2];
pub type Segment = [Point; 2];

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn star_vertices() -> Vec<Point> {
    (0..2 * STAR_POINTS)
        .map(|k| {
            let r = if k % 2 == 0 { RADIUS } else { STAR_INNER };
            let t = FRAC_PI_2 + k as f64 * PI / STAR_POINTS as f64;
            [CENTER[0] + r * t.cos(), CENTER[1] + r * t.sin()]
        })
        .collect()
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    if dx == 0.0 && dy == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

fn polygon_contains(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    for (i, a) in poly.iter().enumerate() {
        let b = poly[(i + 1) % poly.len()];
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]) {
            inside = !inside;
        }
    }
    inside
}

impl Shape {
    /// Exact signed distance, negative inside.
    pub fn signed_distance(self, p: Point) -> f64 {
        match self {
            Shape::Circle => dist(p, CENTER) - RADIUS,
            Shape::Star => {
                let poly = star_vertices();
                let d = (0..poly.len())
                    .map(|i| segment_distance(p, poly[i], poly[(i + 1) % poly.len()]))
                    .fold(f64::INFINITY, f64::min);
                if polygon_contains(p, &poly) { -d } else { d }
            }
        }
    }

    /// `count` points equispaced in arc length along the curve.
    pub fn boundary_points(self, count: usize) -> Vec<Point> {
        match self {
            Shape::Circle => (0..count)
                .map(|k| {
                    let t = TAU * k as f64 / count as f64;
                    [CENTER[0] + RADIUS * t.cos(), CENTER[1] + RADIUS * t.sin()]
                })
                .collect(),
            Shape::Star => {
                let poly = star_vertices();
                let edge = dist(poly[0], poly[1]);
                let total = edge * poly.len() as f64;
                (0..count)
                    .map(|k| {
                        let s = total * k as f64 / count as f64;
                        let i = ((s / edge) as usize).min(poly.len() - 1);
                        let t = s / edge - i as f64;
                        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
                        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
                    })
                    .collect()
            }
        }
    }
}

/// Zero-levelset segments of a grid function by marching squares.
///
/// `values[j * n + i]` is sampled at `(i·s, j·s)` with `s = 1/(n−1)`;
/// nodes with negative values count as inside.
pub fn marching_squares(values: &[f64], n: usize) -> Vec<Segment> {
    assert_eq!(values.len(), n * n, "grid size mismatch");
    let s = 1.0 / (n - 1) as f64;
    let at = |i: usize, j: usize| values[j * n + i];
    let node = |i: usize, j: usize| [i as f64 * s, j as f64 * s];
    let cross = |p: Point, q: Point, a: f64, b: f64| {
        let t = a / (a - b);
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    };
    let mut segments = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            // Corners counterclockwise from the lower left.
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v = c.map(|(a, b)| at(a, b));
            let inside = v.map(|x| x < 0.0);
            let mut hits = Vec::with_capacity(4);
            for e in 0..4 {
                let f = (e + 1) % 4;
                if inside[e] != inside[f] {
                    hits.push(cross(node(c[e].0, c[e].1), node(c[f].0, c[f].1), v[e], v[f]));
                }
            }
            match hits.len() {
                2 => segments.push([hits[0], hits[1]]),
                4 => {
                    // Saddle: the cell average decides which corners connect.
                    let center_inside = v.iter().sum::<f64>() < 0.0;
                    if center_inside == inside[0] {
                        segments.push([hits[0], hits[3]]);
                        segments.push([hits[1], hits[2]]);
                    } else {
                        segments.push([hits[0], hits[1]]);
                        segments.push([hits[2], hits[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    segments
}

/// Fitted signed-distance function on the evaluation grid and its zero set.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub grid: usize,
    pub spacing: f64,
    /// `values[j * grid + i]` at `(i·spacing, j·spacing)`.
    pub values: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Largest `|d(p)|` over recovered levelset points, `d` the exact signed distance.
    pub max_deviation: f64,
    /// Largest distance from a true boundary point to the recovered levelset.
    pub coverage_gap: f64,
    pub report: SolveReport,
    pub record: ExperimentRecord,
    pub checks: Vec<Check>,
}

impl Reconstruction {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `x,y,value` rows.
    pub fn write_grid_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,value")?;
        for j in 0..self.grid {
            for i in 0..self.grid {
                let v = self.values[j * self.grid + i];
                writeln!(out, "{},{},{v:e}", i as f64 * self.spacing, j as f64 * self.spacing)?;
            }
        }
        Ok(())
    }

    /// `x0,y0,x1,y1` rows.
    pub fn write_levelset_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x0,y0,x1,y1")?;
        for [a, b] in &self.segments {
            writeln!(out, "{},{},{},{}", a[0], a[1], b[0], b[1])?;
        }
        Ok(())
    }
}

/// Boundary samples with value zero plus uniform off-surface samples with
/// their exact signed distances.
pub fn signed_distance_samples(cfg: &ExperimentConfig) -> Result<(DataSiteSet, Vec<f64>)> {
    if cfg.boundary_samples == 0 || cfg.off_surface_samples == 0 {
        return Err(Error::InvalidInput("signed distance fitting needs boundary and off-surface samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut coords = Vec::with_capacity(2 * cfg.reconstruction_sites());
    let mut values = Vec::with_capacity(cfg.reconstruction_sites());
    for p in cfg.shape.boundary_points(cfg.boundary_samples) {
        coords.extend_from_slice(&p);
        values.push(0.0);
    }
    for _ in 0..cfg.off_surface_samples {
        let p = [rng.gen::<f64>(), rng.gen::<f64>()];
        coords.extend_from_slice(&p);
        values.push(cfg.shape.signed_distance(p));
    }
    if !(values.iter().any(|&v| v < 0.0) && values.iter().any(|&v| v > 0.0)) {
        return Err(Error::InvalidInput("off-surface samples must include both signs".into()));
    }
    Ok((DataSiteSet::new(2, coords, BoundingBox::unit_cube(2))?, values))
}

/// Fits the signed distance with a Cholesky-footprint preconditioned PCG,
/// evaluates it on a `grid × grid` lattice and extracts the zero levelset.
pub fn reconstruct_implicit_curve(cfg: &ExperimentConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let spec = cfg.kernel_spec()?;
    let (sites, data) = signed_distance_samples(cfg)?;
    let n = sites.len();
    let mut record = ExperimentRecord::new("reconstruct", n, spec.nu(), cfg.kappa);

    let start = Instant::now();
    let system = assemble(&spec, &sites, cfg.lambda_for(n, RECONSTRUCTION_LAMBDA_FACTOR))?;
    record.assembly_ms = ms(start.elapsed());

    let start = Instant::now();
    let h = fill_distance(cfg, &sites)?;
    let fps = Footprints::from_kappa(&sites, h, cfg.kappa)?;
    let pre = build_cholesky_preconditioner(&system, &fps)?;
    record.factorization_ms = ms(start.elapsed());
    record.mean_footprint = Some(fps.mean_size());
    record.compression_rate = Some(pre.factor.compression_rate());
    let (alpha, report) = pcg(|x| system.matvec(x), &data, |x| pre.apply(x), cfg.tolerance, cfg.max_iterations);
    record.solve_ms = ms(start.elapsed());
    record.iterations = Some(report.iterations);
    record.converged = Some(report.converged);

    let g = cfg.grid;
    let spacing = 1.0 / (g - 1) as f64;
    let rows = (0..g)
        .into_par_iter()
        .map(|j| {
            let queries: Vec<f64> = (0..g).flat_map(|i| [i as f64 * spacing, j as f64 * spacing]).collect();
            Ok(cross_matrix(&spec, &sites, &queries)?.matvec(&alpha))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = rows.concat();
    let segments = marching_squares(&values, g);

    let max_deviation = segments
        .iter()
        .flat_map(|[a, b]| [*a, *b, [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]])
        .map(|p| cfg.shape.signed_distance(p).abs())
        .fold(0.0, f64::max);
    let coverage_gap = if segments.is_empty() {
        f64::INFINITY
    } else {
        cfg.shape
            .boundary_points(cfg.boundary_samples)
            .par_iter()
            .map(|&p| segments.iter().map(|&[a, b]| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max)
    };

    let tolerance = 2.0 * spacing;
    let checks = vec![
        Check::new(
            "zero levelset within two grid cells of the boundary",
            !segments.is_empty() && max_deviation <= tolerance && coverage_gap <= tolerance,
            format!("deviation {max_deviation:.3e}, coverage gap {coverage_gap:.3e}, allowed {tolerance:.3e}"),
        ),
        Check::new(
            "preconditioned CG converges within the iteration budget",
            report.converged && report.iterations <= MAX_RECONSTRUCTION_ITERATIONS,
            format!("{} iterations, relative residual {:.2e}", report.iterations, report.final_relative_residual),
        ),
    ];
    Ok(Reconstruction { grid: g, spacing, values, segments, max_deviation, coverage_gap, report, record, checks })
}
