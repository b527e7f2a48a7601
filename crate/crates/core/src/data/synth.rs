use std::f64::consts::PI;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Lot, LotRegistry, ParkingEvent, Status, TimeRange, STEP_MINUTES};
use crate::error::{Error, Result};
use crate::preprocess::METERS_PER_DEGREE;

const STEPS_PER_DAY: f64 = 96.0;
const STEPS_PER_WEEK: f64 = 672.0;

/// Parameters of the synthetic city.
///
/// Clusters are laid out in neighborhoods of `group_size` streets whose
/// centroids sit within proximity range of each other, while
/// neighborhoods are far apart. The free fraction of cluster `k` at step
/// `t` is
///
/// ```text
/// p_k(t) = mean_k + daily_amplitude  * sin(2π (t + phase_g) / 96)
///                 + weekly_amplitude * sin(2π t / 672)
///                 + noise * (sqrt(ρ) g_g(t) + sqrt(1 − ρ) u_k(t))
/// ```
///
/// clamped to `[0, 1]`, where `g_g` is shared by the neighborhood, `u_k` is
/// private, both unit-variance AR(1) processes with coefficient
/// `noise_persistence`, and ρ is `spatial_correlation`. Exactly
/// `round(p_k n_k)` lots of the cluster are free at each tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub clusters: usize,
    pub group_size: usize,
    pub lots_min: usize,
    pub lots_max: usize,
    pub daily_amplitude: f64,
    pub weekly_amplitude: f64,
    pub spatial_correlation: f64,
    pub noise: f64,
    pub noise_persistence: f64,
    pub weeks: u32,
    pub start: DateTime<Utc>,
    pub group_spacing_m: f64,
    pub cluster_radius_m: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            clusters: 27,
            group_size: 3,
            lots_min: 8,
            lots_max: 16,
            daily_amplitude: 0.25,
            weekly_amplitude: 0.1,
            spatial_correlation: 0.8,
            noise: 0.1,
            noise_persistence: 0.8,
            weeks: 4,
            start: Utc.with_ymd_and_hms(2014, 4, 29, 0, 0, 0).unwrap(),
            group_spacing_m: 400.0,
            cluster_radius_m: 25.0,
        }
    }
}

impl SynthSpec {
    pub fn steps(&self) -> usize {
        self.weeks as usize * 7 * STEPS_PER_DAY as usize
    }

    pub fn range(&self) -> TimeRange {
        TimeRange {
            start: self.start,
            end: self.start + Duration::minutes(STEP_MINUTES * self.steps() as i64),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.clusters == 0 || self.group_size == 0 {
            return bad("cluster and group counts must be positive");
        }
        if self.lots_min == 0 || self.lots_max < self.lots_min {
            return bad("lot counts must satisfy 0 < lots_min <= lots_max");
        }
        if self.weeks == 0 {
            return bad("duration must be positive");
        }
        if !(0.0..=1.0).contains(&self.spatial_correlation) {
            return bad("spatial correlation must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.noise_persistence) {
            return bad("noise persistence must lie in [0, 1)");
        }
        if self.noise < 0.0 || self.daily_amplitude < 0.0 || self.weekly_amplitude < 0.0 {
            return bad("amplitudes and noise must be non-negative");
        }
        if self.start.timestamp() % (STEP_MINUTES * 60) != 0 {
            return bad("start must fall on a 15-minute boundary");
        }
        Ok(())
    }
}

/// Generates a lot registry and its event log.
///
/// Every lot reports its initial state at `spec.start`; later changes are
/// stamped inside the 15 minutes preceding the tick they belong to.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<(LotRegistry, Vec<ParkingEvent>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = spec.clusters.div_ceil(spec.group_size);
    let grid = (groups as f64).sqrt().ceil() as usize;
    let lat0 = 43.4623_f64;
    let lon0 = -3.8100_f64;
    let m_lat = 1.0 / METERS_PER_DEGREE;
    let m_lon = 1.0 / (METERS_PER_DEGREE * lat0.to_radians().cos());

    let sizes: Vec<usize> = (0..spec.clusters)
        .map(|_| rng.random_range(spec.lots_min..=spec.lots_max))
        .collect();
    let means: Vec<f64> = (0..spec.clusters).map(|_| rng.random_range(0.3..0.7)).collect();
    let phases: Vec<f64> = (0..groups).map(|_| rng.random_range(0.0..STEPS_PER_DAY)).collect();

    let mut lots = Vec::new();
    for k in 0..spec.clusters {
        let g = k / spec.group_size;
        let j = k % spec.group_size;
        let (gx, gy) = ((g % grid) as f64, (g / grid) as f64);
        let angle = 2.0 * PI * j as f64 / spec.group_size as f64;
        let cx = gx * spec.group_spacing_m + spec.cluster_radius_m * angle.cos();
        let cy = gy * spec.group_spacing_m + spec.cluster_radius_m * angle.sin();
        for i in 0..sizes[k] {
            let dx = rng.random_range(-8.0..8.0);
            let dy = rng.random_range(-8.0..8.0);
            lots.push(Lot {
                lot_id: format!("L{k:03}-{i:02}"),
                lat: lat0 + (cy + dy) * m_lat,
                lon: lon0 + (cx + dx) * m_lon,
                street: format!("Street {k:03}"),
            });
        }
    }

    let steps = spec.steps();
    let phi = spec.noise_persistence;
    let innov = (1.0 - phi * phi).sqrt();
    let rho = spec.spatial_correlation;
    let mut shared: Vec<f64> = (0..groups).map(|_| rng.sample(StandardNormal)).collect();
    let mut private: Vec<f64> = (0..spec.clusters).map(|_| rng.sample(StandardNormal)).collect();

    // lot states per cluster, true = free
    let mut free: Vec<Vec<bool>> = sizes.iter().map(|&n| vec![false; n]).collect();
    let mut events = Vec::new();
    let tick = Duration::minutes(STEP_MINUTES);

    for t in 0..steps {
        if t > 0 {
            for s in shared.iter_mut() {
                *s = phi * *s + innov * rng.sample::<f64, _>(StandardNormal);
            }
            for u in private.iter_mut() {
                *u = phi * *u + innov * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let at = spec.start + tick * t as i32;
        for k in 0..spec.clusters {
            let g = k / spec.group_size;
            let tf = t as f64;
            let latent = rho.sqrt() * shared[g] + (1.0 - rho).sqrt() * private[k];
            let p = means[k]
                + spec.daily_amplitude * (2.0 * PI * (tf + phases[g]) / STEPS_PER_DAY).sin()
                + spec.weekly_amplitude * (2.0 * PI * tf / STEPS_PER_WEEK).sin()
                + spec.noise * latent;
            let n = sizes[k];
            let target = (p.clamp(0.0, 1.0) * n as f64).round() as usize;
            let current = free[k].iter().filter(|&&f| f).count();

            let flips: Vec<usize> = if t == 0 {
                sample(&mut rng, n, target).into_vec()
            } else if target > current {
                let pool: Vec<usize> = (0..n).filter(|&i| !free[k][i]).collect();
                sample(&mut rng, pool.len(), target - current)
                    .into_iter()
                    .map(|i| pool[i])
                    .collect()
            } else {
                let pool: Vec<usize> = (0..n).filter(|&i| free[k][i]).collect();
                sample(&mut rng, pool.len(), current - target)
                    .into_iter()
                    .map(|i| pool[i])
                    .collect()
            };
            for &i in &flips {
                free[k][i] = !free[k][i];
            }
            if t == 0 {
                for (i, &f) in free[k].iter().enumerate() {
                    events.push(ParkingEvent {
                        lot_id: format!("L{k:03}-{i:02}"),
                        timestamp: at,
                        status: if f { Status::Free } else { Status::Occupied },
                    });
                }
            } else {
                for &i in &flips {
                    let offset = Duration::seconds(rng.random_range(0..900));
                    events.push(ParkingEvent {
                        lot_id: format!("L{k:03}-{i:02}"),
                        timestamp: at - offset,
                        status: if free[k][i] { Status::Free } else { Status::Occupied },
                    });
                }
            }
        }
    }
    events.sort_by(|a, b| (a.timestamp, &a.lot_id).cmp(&(b.timestamp, &b.lot_id)));
    Ok((LotRegistry::new(lots)?, events))
}
