//! Data sites: generation, validation, geometry, neighbor queries and the
//! cluster tree.

pub mod cluster;
pub mod geometry;
pub mod io;
mod kdtree;
pub mod sites;

pub use cluster::{build_cluster_tree, ClusterNode, ClusterTree};
pub use geometry::{default_probe_resolution, geometry_summary, GeometrySummary};
pub use kdtree::distance;
pub use sites::{equidistant_1d, generate_uniform, BoundingBox, DataSiteSet};
