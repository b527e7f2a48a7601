use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::ClusterMap;

/// Mean Earth radius times π/180.
pub const METERS_PER_DEGREE: f64 = 6_371_008.8 * std::f64::consts::PI / 180.0;

pub const DEFAULT_THRESHOLD_M: f64 = 95.0;

/// Undirected simple graph over clusters; edges are stored once with `u < v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProximityGraph {
    pub nodes: usize,
    pub edges: Vec<[usize; 2]>,
}

impl ProximityGraph {
    pub fn new(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out: Vec<[usize; 2]> = Vec::new();
        for (u, v) in edges {
            if u == v || u >= nodes || v >= nodes {
                return Err(Error::Data(format!("invalid edge ({u}, {v}) for {nodes} nodes")));
            }
            out.push([u.min(v), u.max(v)]);
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self { nodes, edges: out })
    }

    pub fn empty(nodes: usize) -> Self {
        Self {
            nodes,
            edges: Vec::new(),
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&[u.min(v), u.max(v)]).is_ok()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&[a, b]| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Dense symmetric 0/1 adjacency, row-major `nodes × nodes`.
    pub fn adjacency(&self) -> Vec<f64> {
        let n = self.nodes;
        let mut a = vec![0.0; n * n];
        for &[u, v] in &self.edges {
            a[u * n + v] = 1.0;
            a[v * n + u] = 1.0;
        }
        a
    }

    /// Relabels nodes: old node `k` becomes `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::new(self.nodes, self.edges.iter().map(|&[u, v]| (perm[u], perm[v])))
            .expect("permutation of a valid graph")
    }

    pub fn to_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        let g: ProximityGraph = serde_json::from_reader(reader)?;
        Self::new(g.nodes, g.edges.iter().map(|&[u, v]| (u, v)))
    }
}

/// Planar coordinates in meters, equirectangular about `ref_lat`.
pub(crate) fn project(lat: f64, lon: f64, ref_lat: f64) -> (f64, f64) {
    (
        lon * ref_lat.to_radians().cos() * METERS_PER_DEGREE,
        lat * METERS_PER_DEGREE,
    )
}

/// Links clusters whose centroids lie within `threshold_m` meters (inclusive).
pub fn build_graph(map: &ClusterMap, threshold_m: f64) -> Result<ProximityGraph> {
    if map.is_empty() {
        return Err(Error::Data("graph needs at least one cluster".into()));
    }
    if !(threshold_m > 0.0) {
        return Err(Error::Config(format!("distance threshold {threshold_m} must be positive")));
    }
    let k = map.len();
    let ref_lat = map.centroids.iter().map(|c| c.0).sum::<f64>() / k as f64;
    let pts: Vec<(f64, f64)> = map
        .centroids
        .iter()
        .map(|&(lat, lon)| project(lat, lon, ref_lat))
        .collect();
    let mut edges = Vec::new();
    for u in 0..k {
        for v in u + 1..k {
            let d = (pts[u].0 - pts[v].0).hypot(pts[u].1 - pts[v].1);
            if d <= threshold_m {
                edges.push((u, v));
            }
        }
    }
    ProximityGraph::new(k, edges)
}
