use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Seq2Seq;
use crate::preprocess::{ClusterMap, ClusterSeries, WindowSet};
use crate::training::baselines::{ar_fit, ar_forecast, seasonal_naive, ArModel};

/// Horizons reported by [`evaluate`], in 15-minute steps.
pub const EVAL_HORIZONS: [usize; 4] = [1, 2, 4, 8];

/// Anything that forecasts normalized cluster vectors from a series.
pub trait Forecaster: Sync {
    fn id(&self) -> String;

    /// Forecasts ticks `origin .. origin + steps` using only ticks before
    /// `origin`. Returns `steps` rows of `K` values.
    fn forecast(&self, series: &ClusterSeries, origin: usize, steps: usize) -> Result<Vec<Vec<f64>>>;

    /// Caveat printed with reports, if any.
    fn note(&self) -> Option<String> {
        None
    }
}

impl Forecaster for Seq2Seq<f64> {
    fn id(&self) -> String {
        format!("seq2seq-{}", self.kind())
    }

    fn forecast(&self, series: &ClusterSeries, origin: usize, steps: usize) -> Result<Vec<Vec<f64>>> {
        let m = self.history_len();
        if origin < m || origin + steps > series.len() {
            return Err(Error::Config(format!(
                "forecast origin {origin} needs {m} past and {steps} future ticks in a series of {}",
                series.len()
            )));
        }
        self.predict(
            &series.vectors[origin - m..origin],
            &series.calendar[origin..origin + steps],
            steps,
        )
    }
}

/// Per-cluster least-squares AR(p) fitted on a range of the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArBaseline {
    pub models: Vec<ArModel>,
}

impl ArBaseline {
    pub fn fit(series: &ClusterSeries, range: std::ops::Range<usize>, p: usize) -> Result<Self> {
        let models = (0..series.clusters())
            .map(|k| ar_fit(&series.column(k)[range.clone()], p))
            .collect::<Result<_>>()?;
        Ok(Self { models })
    }
}

impl Forecaster for ArBaseline {
    fn id(&self) -> String {
        format!("ar{}", self.models.first().map_or(0, ArModel::order))
    }

    fn note(&self) -> Option<String> {
        Some("least-squares AR without differencing or moving-average terms; not a Box-Jenkins ARIMA fit".into())
    }

    fn forecast(&self, series: &ClusterSeries, origin: usize, steps: usize) -> Result<Vec<Vec<f64>>> {
        let per_cluster: Vec<Vec<f64>> = self
            .models
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let hist: Vec<f64> = series.vectors[..origin].iter().map(|v| v.values[k]).collect();
                ar_forecast(m, &hist, steps)
            })
            .collect::<Result<_>>()?;
        Ok(transpose(&per_cluster, steps))
    }
}

/// Seasonal-naive forecast with a period in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonalNaive {
    pub period: usize,
}

impl Forecaster for SeasonalNaive {
    fn id(&self) -> String {
        format!("seasonal-naive-{}", self.period)
    }

    fn note(&self) -> Option<String> {
        Some("seasonal-naive repetition; stands in for a seasonal ARIMA fit".into())
    }

    fn forecast(&self, series: &ClusterSeries, origin: usize, steps: usize) -> Result<Vec<Vec<f64>>> {
        let lo = origin.saturating_sub(self.period);
        let per_cluster: Vec<Vec<f64>> = (0..series.clusters())
            .map(|k| {
                let hist: Vec<f64> = series.vectors[lo..origin].iter().map(|v| v.values[k]).collect();
                seasonal_naive(&hist, self.period, steps)
            })
            .collect::<Result<_>>()?;
        Ok(transpose(&per_cluster, steps))
    }
}

fn transpose(per_cluster: &[Vec<f64>], steps: usize) -> Vec<Vec<f64>> {
    (0..steps).map(|j| per_cluster.iter().map(|c| c[j]).collect()).collect()
}

/// MAE in lot counts per cluster and city-wide at each horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub windows: usize,
    /// Horizons in steps.
    pub horizons: Vec<usize>,
    /// City-wide MAE of summed counts, one per horizon.
    pub city: Vec<f64>,
    /// `per_cluster[k][h]`.
    pub per_cluster: Vec<Vec<f64>>,
}

impl EvalReport {
    pub fn horizon_minutes(&self) -> Vec<i64> {
        self.horizons.iter().map(|&h| 15 * h as i64).collect()
    }

    pub fn city_at(&self, horizon: usize) -> Option<f64> {
        self.horizons.iter().position(|&h| h == horizon).map(|i| self.city[i])
    }

    /// City-wide MAE never exceeds the sum of per-cluster MAEs.
    pub fn check_triangle(&self) -> Result<()> {
        for (i, &c) in self.city.iter().enumerate() {
            let sum: f64 = self.per_cluster.iter().map(|r| r[i]).sum();
            if c > sum * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Data(format!(
                    "city-wide MAE {c} exceeds per-cluster sum {sum} at horizon {}",
                    self.horizons[i]
                )));
            }
        }
        Ok(())
    }

    /// `cluster_id,horizon_min,mae_lots`; clusters first, then `all` rows.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["cluster_id", "horizon_min", "mae_lots"])?;
        let mins = self.horizon_minutes();
        for (k, row) in self.per_cluster.iter().enumerate() {
            for (m, v) in mins.iter().zip(row) {
                w.write_record([k.to_string(), m.to_string(), v.to_string()])?;
            }
        }
        for (m, v) in mins.iter().zip(&self.city) {
            w.write_record(["all".to_string(), m.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout back. Model id and window count are not part of
    /// it and come back empty.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        if r.headers()?.iter().collect::<Vec<_>>() != ["cluster_id", "horizon_min", "mae_lots"] {
            return Err(Error::Data("unexpected report header".into()));
        }
        let mut horizons: Vec<usize> = Vec::new();
        let mut cluster_horizons: Vec<usize> = Vec::new();
        let mut per_cluster: Vec<Vec<f64>> = Vec::new();
        let mut city = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let bad = || Error::Data(format!("bad report row {:?}", rec.iter().collect::<Vec<_>>()));
            let mins: usize = rec[1].parse().map_err(|_| bad())?;
            let v: f64 = rec[2].parse().map_err(|_| bad())?;
            if mins % 15 != 0 || mins == 0 {
                return Err(bad());
            }
            let h = mins / 15;
            if &rec[0] == "all" {
                horizons.push(h);
                city.push(v);
                continue;
            }
            let k: usize = rec[0].parse().map_err(|_| bad())?;
            if k == per_cluster.len() {
                per_cluster.push(Vec::new());
            } else if k + 1 != per_cluster.len() {
                return Err(bad());
            }
            if k == 0 {
                cluster_horizons.push(h);
            }
            per_cluster[k].push(v);
        }
        let grid = per_cluster.is_empty() || cluster_horizons == horizons;
        if !grid || per_cluster.iter().any(|r| r.len() != horizons.len()) {
            return Err(Error::Data("report rows do not form a full cluster-by-horizon grid".into()));
        }
        Ok(Self {
            model: String::new(),
            note: None,
            windows: 0,
            horizons,
            city,
            per_cluster,
        })
    }

    pub fn to_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

/// Decodes every window without teacher forcing and scores the forecasts
/// in lot counts at the horizons in [`EVAL_HORIZONS`] that fit the window.
pub fn evaluate<M: Forecaster + ?Sized>(model: &M, windows: &WindowSet, map: &ClusterMap) -> Result<EvalReport> {
    if windows.is_empty() {
        return Err(Error::Config("no test windows to evaluate".into()));
    }
    let series = windows.series();
    let k = series.clusters();
    if k != map.sizes.len() {
        return Err(Error::Config(format!(
            "series has {k} clusters, map has {}",
            map.sizes.len()
        )));
    }
    let steps = windows.horizon();
    let horizons: Vec<usize> = EVAL_HORIZONS.iter().copied().filter(|&h| h <= steps).collect();
    let sizes: Vec<f64> = map.sizes.iter().map(|&n| n as f64).collect();

    // per window: |error| per cluster per horizon, and city-wide per horizon
    let errs: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..windows.len())
        .into_par_iter()
        .map(|i| {
            let w = windows.get(i);
            let origin = w.start + windows.history();
            let pred = model.forecast(series, origin, steps)?;
            if pred.len() != steps || pred.iter().any(|r| r.len() != k) {
                return Err(Error::Shape(format!("forecaster {} returned a malformed forecast", model.id())));
            }
            let mut cl = vec![vec![0.0; horizons.len()]; k];
            let mut city = vec![0.0; horizons.len()];
            for (hi, &h) in horizons.iter().enumerate() {
                let (p, t) = (&pred[h - 1], &w.target[h - 1].values);
                let (mut ps, mut ts) = (0.0, 0.0);
                for c in 0..k {
                    let pc = p[c] * sizes[c];
                    let tc = t[c] * sizes[c];
                    cl[c][hi] = (pc - tc).abs();
                    ps += pc;
                    ts += tc;
                }
                city[hi] = (ps - ts).abs();
            }
            Ok((cl, city))
        })
        .collect::<Result<_>>()?;

    let n = errs.len() as f64;
    let mut per_cluster = vec![vec![0.0; horizons.len()]; k];
    let mut city = vec![0.0; horizons.len()];
    for (cl, ci) in &errs {
        for c in 0..k {
            for h in 0..horizons.len() {
                per_cluster[c][h] += cl[c][h];
            }
        }
        for h in 0..horizons.len() {
            city[h] += ci[h];
        }
    }
    per_cluster.iter_mut().flatten().for_each(|v| *v /= n);
    city.iter_mut().for_each(|v| *v /= n);
    let report = EvalReport {
        model: model.id(),
        note: model.note(),
        windows: errs.len(),
        horizons,
        city,
        per_cluster,
    };
    report.check_triangle()?;
    Ok(report)
}
