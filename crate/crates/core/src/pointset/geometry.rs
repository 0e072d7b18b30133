use super::sites::DataSiteSet;
use crate::error::{Error, Result};

/// Fill distance estimate, separation radius and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySummary {
    pub fill_distance_est: f64,
    pub separation_radius: f64,
    pub quasi_uniformity_ratio: f64,
}

/// Probe-grid resolution giving roughly `16 N` probes, clamped per axis.
pub fn default_probe_resolution(dim: usize, n: usize) -> usize {
    let target = (16 * n.max(1)) as f64;
    (target.powf(1.0 / dim as f64).ceil() as usize).clamp(32, 2048)
}

/// Exact separation radius `½ min_{i≠j} ‖x_i − x_j‖` and a probe-grid
/// estimate of the fill distance over the domain box.
///
/// The grid has `probe_resolution` equispaced nodes per axis, endpoints
/// included; its estimate is a lower bound converging to the fill distance.
pub fn geometry_summary(sites: &DataSiteSet, probe_resolution: usize) -> Result<GeometrySummary> {
    if sites.len() < 2 {
        return Err(Error::InvalidInput("geometry summary needs at least two sites".into()));
    }
    let mut min_dist = f64::INFINITY;
    let mut pair = (0, 0);
    let tree = sites.kd_tree();
    for i in 0..sites.len() {
        if let Some((j, d)) = tree.nearest(sites.point(i), Some(i)) {
            if d < min_dist {
                min_dist = d;
                pair = (i.min(j), i.max(j));
            }
        }
    }
    if min_dist <= 0.0 {
        return Err(Error::DuplicatePoints { first: pair.0, second: pair.1 });
    }
    let separation_radius = 0.5 * min_dist;

    let dim = sites.dim();
    let domain = sites.domain();
    let res = probe_resolution.max(1);
    let axis: Vec<Vec<f64>> = (0..dim)
        .map(|d| {
            if res == 1 {
                vec![0.5 * (domain.lower[d] + domain.upper[d])]
            } else {
                (0..res)
                    .map(|k| domain.lower[d] + domain.extent(d) * k as f64 / (res - 1) as f64)
                    .collect()
            }
        })
        .collect();
    let total = res.checked_pow(dim as u32).expect("probe grid too large");
    let mut probe = vec![0.0; dim];
    let mut fill = 0.0_f64;
    for flat in 0..total {
        let mut rem = flat;
        for d in 0..dim {
            probe[d] = axis[d][rem % res];
            rem /= res;
        }
        let (_, dist) = sites.nearest(&probe);
        fill = fill.max(dist);
    }
    // The estimator is a lower bound; keep the documented ordering q ≤ h.
    let fill_distance_est = fill.max(separation_radius);
    Ok(GeometrySummary {
        fill_distance_est,
        separation_radius,
        quasi_uniformity_ratio: fill_distance_est / separation_radius,
    })
}
