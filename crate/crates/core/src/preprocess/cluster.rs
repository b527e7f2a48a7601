use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{AvailabilityFrame, LotRegistry};
use crate::error::{Error, Result};

/// Assignment of lots to street clusters.
///
/// Cluster ids follow the lexicographic order of street labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMap {
    pub streets: Vec<String>,
    /// Lot ids in registry (frame column) order.
    pub lot_ids: Vec<String>,
    /// Cluster of each entry of `lot_ids`.
    pub assignment: Vec<usize>,
    pub sizes: Vec<usize>,
    /// `(lat, lon)` mean of member lots.
    pub centroids: Vec<(f64, f64)>,
}

/// Per-cluster fraction of free lots at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterVector {
    pub step_index: i64,
    pub values: Vec<f64>,
}

impl ClusterMap {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn cluster_of(&self, lot_id: &str) -> Option<usize> {
        self.lot_ids
            .iter()
            .position(|l| l == lot_id)
            .map(|i| self.assignment[i])
    }

    /// Writes the `lot_id,cluster_id` dump.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lot_id", "cluster_id"])?;
        for (id, c) in self.lot_ids.iter().zip(&self.assignment) {
            w.write_record([id.as_str(), &c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Applies a cluster relabeling: new id of old cluster `k` is `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.len();
        let mut streets = vec![String::new(); k];
        let mut sizes = vec![0; k];
        let mut centroids = vec![(0.0, 0.0); k];
        for old in 0..k {
            streets[perm[old]] = self.streets[old].clone();
            sizes[perm[old]] = self.sizes[old];
            centroids[perm[old]] = self.centroids[old];
        }
        Self {
            streets,
            lot_ids: self.lot_ids.clone(),
            assignment: self.assignment.iter().map(|&c| perm[c]).collect(),
            sizes,
            centroids,
        }
    }
}

/// One cluster per distinct street label.
pub fn cluster_lots(registry: &LotRegistry) -> Result<ClusterMap> {
    if registry.is_empty() {
        return Err(Error::Data("cannot cluster an empty registry".into()));
    }
    let mut by_street: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, lot) in registry.lots().iter().enumerate() {
        by_street.entry(lot.street.as_str()).or_default().push(i);
    }
    let mut assignment = vec![0; registry.len()];
    let mut streets = Vec::with_capacity(by_street.len());
    let mut sizes = Vec::with_capacity(by_street.len());
    let mut centroids = Vec::with_capacity(by_street.len());
    for (k, (street, members)) in by_street.into_iter().enumerate() {
        let n = members.len() as f64;
        let (mut lat, mut lon) = (0.0, 0.0);
        for &i in &members {
            assignment[i] = k;
            lat += registry.lots()[i].lat;
            lon += registry.lots()[i].lon;
        }
        streets.push(street.to_string());
        sizes.push(members.len());
        centroids.push((lat / n, lon / n));
    }
    Ok(ClusterMap {
        streets,
        lot_ids: registry.lots().iter().map(|l| l.lot_id.clone()).collect(),
        assignment,
        sizes,
        centroids,
    })
}

/// Free lots per cluster divided by cluster size.
pub fn normalize(frames: &[AvailabilityFrame], map: &ClusterMap) -> Result<Vec<ClusterVector>> {
    frames
        .iter()
        .map(|f| {
            if f.values.len() != map.assignment.len() {
                return Err(Error::Data(format!(
                    "frame {} has {} values for {} lots",
                    f.step_index,
                    f.values.len(),
                    map.assignment.len()
                )));
            }
            let mut counts = vec![0usize; map.len()];
            for (&v, &c) in f.values.iter().zip(&map.assignment) {
                counts[c] += v as usize;
            }
            Ok(ClusterVector {
                step_index: f.step_index,
                values: counts
                    .iter()
                    .zip(&map.sizes)
                    .map(|(&c, &n)| c as f64 / n as f64)
                    .collect(),
            })
        })
        .collect()
}

/// Expected free-lot counts per cluster.
pub fn denormalize(values: &[f64], map: &ClusterMap) -> Result<Vec<f64>> {
    if values.len() != map.len() {
        return Err(Error::Data(format!(
            "vector of {} values for {} clusters",
            values.len(),
            map.len()
        )));
    }
    Ok(values
        .iter()
        .zip(&map.sizes)
        .map(|(&v, &n)| v * n as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Lot;

    fn lot(id: &str, lat: f64, lon: f64, street: &str) -> Lot {
        Lot {
            lot_id: id.into(),
            lat,
            lon,
            street: street.into(),
        }
    }

    #[test]
    fn groups_by_street() {
        let reg = LotRegistry::new(vec![
            lot("a", 1.0, 1.0, "B St"),
            lot("b", 2.0, 2.0, "A St"),
            lot("c", 3.0, 5.0, "B St"),
        ])
        .unwrap();
        let m = cluster_lots(&reg).unwrap();
        assert_eq!(m.streets, vec!["A St", "B St"]);
        assert_eq!(m.sizes, vec![1, 2]);
        assert_eq!(m.assignment, vec![1, 0, 1]);
        assert_eq!(m.centroids[1], (2.0, 3.0));
    }

    #[test]
    fn single_street() {
        let reg = LotRegistry::new(vec![lot("a", 1.0, 4.0, "X"), lot("b", 3.0, 8.0, "X")]).unwrap();
        let m = cluster_lots(&reg).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.centroids[0], (2.0, 6.0));
    }

    #[test]
    fn normalize_and_back() {
        let reg = LotRegistry::new((0..5).map(|i| lot(&format!("l{i}"), 0.0, 0.0, "S")).collect()).unwrap();
        let m = cluster_lots(&reg).unwrap();
        let f = AvailabilityFrame {
            step_index: 0,
            values: vec![1, 0, 1, 1, 0],
        };
        let v = normalize(&[f], &m).unwrap();
        assert_eq!(v[0].values, vec![0.6]);
        assert_eq!(denormalize(&v[0].values, &m).unwrap(), vec![3.0]);
        let full = AvailabilityFrame {
            step_index: 1,
            values: vec![1; 5],
        };
        assert_eq!(normalize(&[full], &m).unwrap()[0].values, vec![1.0]);
    }

    #[test]
    fn empty_registry_is_an_error() {
        let reg = LotRegistry::new(vec![]).unwrap();
        assert!(cluster_lots(&reg).is_err());
    }

    #[test]
    fn dump_lists_every_lot() {
        let reg = LotRegistry::new(vec![lot("a", 0.0, 0.0, "Q"), lot("b", 0.0, 0.0, "P")]).unwrap();
        let mut out = Vec::new();
        cluster_lots(&reg).unwrap().to_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "lot_id,cluster_id\na,1\nb,0\n");
    }
}
