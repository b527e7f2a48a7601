//! Street clustering, per-cluster normalization, the proximity graph over
//! cluster centroids, and sliding training windows.

mod cluster;
mod graph;
mod window;

pub use cluster::{cluster_lots, denormalize, normalize, ClusterMap, ClusterVector};
pub use graph::{build_graph, ProximityGraph, DEFAULT_THRESHOLD_M, METERS_PER_DEGREE};
pub use window::{make_windows, ClusterSeries, Window, WindowSet};
