//! Brute-force references and finite-difference checks shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, TimeZone, Utc};
use parkcast_core::autodiff::{ParamId, ParamStore, Session, Tensor, Var};
use parkcast_core::data::{calendar_features, resample, AvailabilityFrame, CalendarFeature, Lot, LotRegistry, ParkingEvent, Status, TimeRange};
use parkcast_core::decoder::{decode, init_state, DecoderConfig, DecoderParams, Teacher};
use parkcast_core::nn::{conv1d_gated, ggnn_output, ggnn_propagate, ConvParams, Dense, GgnnParams, LstmCell, Stride};
use parkcast_core::preprocess::{build_graph, cluster_lots, denormalize, normalize, ClusterVector, ProximityGraph};
use parkcast_core::training::mae_loss;
use parkcast_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn values(store: &ParamStore<f64>, id: ParamId) -> Vec<f64> {
    store.get(id).data().to_vec()
}

/// Overwrites every parameter (biases included) with uniform noise.
pub fn randomize(store: &mut ParamStore<f64>, rng: &mut ChaCha8Rng, scale: f64) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.get(id).len();
        let v = uniform(rng, n, -scale, scale);
        store.set_data(id, &v).unwrap();
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// ---------------------------------------------------------------------------
// plain reference implementations

/// Gated 1D convolution by direct summation. `x` is `[C × L]` row-major.
pub fn conv_ref(store: &ParamStore<f64>, p: &ConvParams, x: &[f64], len: usize) -> Vec<f64> {
    let (c_in, o, f) = (p.in_channels, p.n_filters, p.filter_size);
    let stride = match p.stride {
        Stride::Step(s) => s,
        Stride::FullSpan => 1,
    };
    let lout = (len - f) / stride + 1;
    let (wf, bf, wg, bg) = (values(store, p.w_f), values(store, p.b_f), values(store, p.w_g), values(store, p.b_g));
    let mut out = vec![0.0; o * lout];
    for oi in 0..o {
        for t in 0..lout {
            let mut lin = bf[oi];
            let mut gate = bg[oi];
            for c in 0..c_in {
                for k in 0..f {
                    let xv = x[c * len + t * stride + k];
                    lin += wf[(oi * c_in + c) * f + k] * xv;
                    gate += wg[(oi * c_in + c) * f + k] * xv;
                }
            }
            out[oi * lout + t] = lin * sigmoid(gate);
        }
    }
    out
}

fn row_times(x: &[f64], w: &[f64], cols: usize) -> Vec<f64> {
    let rows = x.len();
    (0..cols).map(|j| (0..rows).map(|i| x[i] * w[i * cols + j]).sum()).collect()
}

/// Node-by-node gated propagation with explicit neighbor sums.
pub fn ggnn_ref(store: &ParamStore<f64>, p: &GgnnParams, graph: &ProximityGraph, h0: &[f64]) -> Vec<f64> {
    let hd = p.hidden;
    let k = graph.nodes;
    let w = |id| values(store, id);
    let (w_msg, b_msg) = (w(p.w_msg), w(p.b_msg));
    let (w_r, u_r, w_z, u_z, w_h, u_h) = (w(p.w_r), w(p.u_r), w(p.w_z), w(p.u_z), w(p.w_h), w(p.u_h));
    let mut h: Vec<Vec<f64>> = (0..k).map(|v| h0[v * hd..(v + 1) * hd].to_vec()).collect();
    for _ in 0..p.steps {
        let lin: Vec<Vec<f64>> = h
            .iter()
            .map(|hv| row_times(hv, &w_msg, hd).iter().zip(&b_msg).map(|(a, b)| a + b).collect())
            .collect();
        let mut next = Vec::with_capacity(k);
        for v in 0..k {
            let mut m = vec![0.0; hd];
            for u in 0..k {
                if u != v && graph.has_edge(u.min(v), u.max(v)) {
                    for j in 0..hd {
                        m[j] += lin[u][j];
                    }
                }
            }
            let add = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<f64>>();
            let r: Vec<f64> = add(row_times(&m, &w_r, hd), row_times(&h[v], &u_r, hd)).into_iter().map(sigmoid).collect();
            let z: Vec<f64> = add(row_times(&m, &w_z, hd), row_times(&h[v], &u_z, hd)).into_iter().map(sigmoid).collect();
            let hr: Vec<f64> = h[v].iter().zip(&r).map(|(a, b)| a * b).collect();
            let cand: Vec<f64> = add(row_times(&m, &w_h, hd), row_times(&hr, &u_h, hd)).into_iter().map(f64::tanh).collect();
            next.push((0..hd).map(|j| (1.0 - z[j]) * h[v][j] + z[j] * cand[j]).collect());
        }
        h = next;
    }
    h.concat()
}

pub fn ggnn_output_ref(store: &ParamStore<f64>, p: &GgnnParams, h: &[f64], a: &[f64], k: usize) -> Vec<f64> {
    let (hd, ad, od) = (p.hidden, p.annotation_dim, p.output_dim);
    let (w_o, b_o) = (values(store, p.w_o), values(store, p.b_o));
    let mut out = Vec::with_capacity(k * od);
    for v in 0..k {
        let cat: Vec<f64> = h[v * hd..(v + 1) * hd].iter().chain(&a[v * ad..(v + 1) * ad]).copied().collect();
        for j in 0..od {
            let s: f64 = b_o[j] + (0..hd + ad).map(|i| cat[i] * w_o[i * od + j]).sum::<f64>();
            out.push(s.tanh());
        }
    }
    out
}

pub fn dense_ref(store: &ParamStore<f64>, d: &Dense, x: &[f64]) -> Vec<f64> {
    let (w, b) = (values(store, d.w), values(store, d.b));
    row_times(x, &w, d.out_dim).iter().zip(&b).map(|(a, b)| a + b).collect()
}

/// One LSTM cell update written gate by gate.
pub fn lstm_cell_ref(
    store: &ParamStore<f64>,
    cell: &LstmCell,
    h: &[f64],
    c: &[f64],
    x: &[f64],
    cal: Option<&[f64]>,
) -> (Vec<f64>, Vec<f64>) {
    let relu = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
    let mut z = h.to_vec();
    match &cell.input_embed {
        Some(e) => z.extend(relu(dense_ref(store, e, x))),
        None => z.extend_from_slice(x),
    }
    if let (Some(e), Some(d)) = (&cell.calendar_embed, cal) {
        z.extend(relu(dense_ref(store, e, d)));
    }
    let hd = cell.hidden;
    let gate = |w: ParamId, b: ParamId| -> Vec<f64> {
        let (w, b) = (values(store, w), values(store, b));
        (0..hd).map(|j| b[j] + (0..z.len()).map(|i| z[i] * w[i * hd + j]).sum::<f64>()).collect()
    };
    let f = gate(cell.w_f, cell.b_f);
    let i = gate(cell.w_i, cell.b_i);
    let g = gate(cell.w_c, cell.b_c);
    let o = gate(cell.w_o, cell.b_o);
    let c2: Vec<f64> = (0..hd).map(|j| sigmoid(f[j]) * c[j] + sigmoid(i[j]) * g[j].tanh()).collect();
    let h2: Vec<f64> = (0..hd).map(|j| sigmoid(o[j]) * c2[j].tanh()).collect();
    (h2, c2)
}

/// Hand-chained decoder: stacked cells, sigmoid head on the top cell state.
pub fn decode_ref(
    store: &ParamStore<f64>,
    p: &DecoderParams,
    code: &[f64],
    last: &[f64],
    cal: &[CalendarFeature],
    steps: usize,
    teacher: Option<(&[ClusterVector], &[bool])>,
) -> Vec<Vec<f64>> {
    let layers = p.cells.len();
    let mut h = vec![code.to_vec(); layers];
    let mut c = vec![code.to_vec(); layers];
    let mut input = last.to_vec();
    let mut out = Vec::new();
    for j in 0..steps {
        if let Some((t, active)) = teacher {
            if j > 0 && active[j] {
                input = t[j - 1].values.clone();
            }
        }
        let d = cal[j].to_array();
        let mut x = input.clone();
        for l in 0..layers {
            let calendar = (l == 0).then_some(&d[..]);
            let (h2, c2) = lstm_cell_ref(store, &p.cells[l], &h[l], &c[l], &x, calendar);
            h[l] = h2.clone();
            c[l] = c2;
            x = h2;
        }
        let pred: Vec<f64> = dense_ref(store, &p.head, &c[layers - 1]).into_iter().map(sigmoid).collect();
        out.push(pred.clone());
        input = pred;
    }
    out
}

pub fn mae_ref(p: &[Vec<f64>], t: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    let mut n = 0;
    for i in 0..p.len() {
        for j in 0..p[i].len() {
            s += (p[i][j] - t[i][j]).abs();
            n += 1;
        }
    }
    s / n as f64
}

pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    const R: f64 = 6_371_008.8;
    let (la1, lo1, la2, lo2) = (a.0.to_radians(), a.1.to_radians(), b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * R * h.sqrt().asin()
}

// ---------------------------------------------------------------------------
// seeded oracle instances; each returns the largest deviation found

pub fn conv_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let c = r.random_range(1..4);
    let len = r.random_range(4..30);
    let full = r.random_bool(0.25);
    let f = if full { len } else { r.random_range(1..=len) };
    let stride = if full { Stride::FullSpan } else { Stride::Step(r.random_range(1..4)) };
    let o = r.random_range(1..5);
    let mut store = ParamStore::new();
    let p = ConvParams::new(&mut store, "c", c, o, f, stride, &mut r);
    randomize(&mut store, &mut r, 1.0);
    let batch = r.random_range(1..4);
    let xs: Vec<Vec<f64>> = (0..batch).map(|_| uniform(&mut r, c * len, -1.0, 1.0)).collect();

    let mut s = Session::new(&store);
    let x = s.constant(Tensor::new(&[batch, c, len], xs.concat()).unwrap()).unwrap();
    let y = conv1d_gated(&mut s, x, &p).unwrap();
    let got = s.value(y).data().to_vec();
    let want: Vec<f64> = xs.iter().flat_map(|x| conv_ref(&store, &p, x, len)).collect();
    let mut worst = max_abs_diff(&got, &want);

    // unbatched input
    let x1 = s.constant(Tensor::new(&[c, len], xs[0].clone()).unwrap()).unwrap();
    let y1 = conv1d_gated(&mut s, x1, &p).unwrap();
    worst = worst.max(max_abs_diff(s.value(y1).data(), &conv_ref(&store, &p, &xs[0], len)));
    worst
}

pub fn random_graph(r: &mut ChaCha8Rng, k: usize, p_edge: f64) -> ProximityGraph {
    let mut edges = Vec::new();
    for u in 0..k {
        for v in u + 1..k {
            if r.random_bool(p_edge) {
                edges.push((u, v));
            }
        }
    }
    ProximityGraph::new(k, edges).unwrap()
}

pub fn ggnn_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let k = r.random_range(2..7);
    let hd = r.random_range(1..6);
    let ad = r.random_range(1..4);
    let od = r.random_range(1..5);
    let steps = r.random_range(0..5);
    let graph = random_graph(&mut r, k, 0.5);
    let mut store = ParamStore::new();
    let p = GgnnParams::new(&mut store, "g", hd, ad, od, steps, &mut r);
    randomize(&mut store, &mut r, 0.8);
    let h0 = uniform(&mut r, k * hd, -1.0, 1.0);
    let a = uniform(&mut r, k * ad, -1.0, 1.0);

    let mut s = Session::new(&store);
    let hv = s.constant(Tensor::new(&[k, hd], h0.clone()).unwrap()).unwrap();
    let av = s.constant(Tensor::new(&[k, ad], a.clone()).unwrap()).unwrap();
    let hi = ggnn_propagate(&mut s, hv, &graph, &p).unwrap();
    let out = ggnn_output(&mut s, hi, av, &p).unwrap();
    let want_h = ggnn_ref(&store, &p, &graph, &h0);
    let want_o = ggnn_output_ref(&store, &p, &want_h, &a, k);
    max_abs_diff(s.value(hi).data(), &want_h).max(max_abs_diff(s.value(out).data(), &want_o))
}

pub fn random_calendar(r: &mut ChaCha8Rng, n: usize) -> Vec<CalendarFeature> {
    let t0 = Utc.with_ymd_and_hms(2014, 1, 1, 0, 0, 0).unwrap() + Duration::minutes(15 * r.random_range(0..35_000));
    (0..n).map(|i| calendar_features(t0 + Duration::minutes(15 * i as i64))).collect()
}

pub fn lstm_chain_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let k = r.random_range(1..6);
    let cfg = DecoderConfig {
        hidden: r.random_range(1..7),
        layers: r.random_range(1..3),
        input_embed: r.random_range(1..5),
        calendar_embed: r.random_range(1..4),
    };
    let mut store = ParamStore::new();
    let p = DecoderParams::build(&cfg, k, &mut store, &mut r).unwrap();
    randomize(&mut store, &mut r, 0.8);
    let steps = r.random_range(1..7);
    let code = uniform(&mut r, cfg.hidden, -1.0, 1.0);
    let last = ClusterVector {
        step_index: 0,
        values: uniform(&mut r, k, 0.0, 1.0),
    };
    let cal = random_calendar(&mut r, steps);
    let targets: Vec<ClusterVector> = (0..steps)
        .map(|i| ClusterVector {
            step_index: i as i64 + 1,
            values: uniform(&mut r, k, 0.0, 1.0),
        })
        .collect();
    let active: Vec<bool> = (0..steps).map(|_| r.random_bool(0.5)).collect();

    let mut worst: f64 = 0.0;
    for use_teacher in [false, true] {
        let teacher = Teacher {
            targets: &targets,
            active: active.clone(),
        };
        let mut s = Session::new(&store);
        let cv = s.constant(Tensor::row(code.clone())).unwrap();
        let st = init_state(&s, cv, &p).unwrap();
        let out = decode(&mut s, st, &last, &cal, steps, use_teacher.then_some(&teacher), &p).unwrap();
        let got: Vec<f64> = out.iter().flat_map(|&v| s.value(v).data().to_vec()).collect();
        let want = decode_ref(&store, &p, &code, &last.values, &cal, steps, use_teacher.then_some((&targets[..], &active[..])));
        worst = worst.max(max_abs_diff(&got, &want.concat()));
    }
    worst
}

pub fn mae_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = r.random_range(1..9);
    let k = r.random_range(1..28);
    let p: Vec<Vec<f64>> = (0..n).map(|_| uniform(&mut r, k, 0.0, 1.0)).collect();
    let t: Vec<Vec<f64>> = (0..n).map(|_| uniform(&mut r, k, 0.0, 1.0)).collect();
    let store = ParamStore::<f64>::new();
    let mut s = Session::new(&store);
    let pv: Vec<Var> = p.iter().map(|v| s.constant(Tensor::row(v.clone())).unwrap()).collect();
    let tv: Vec<Var> = t.iter().map(|v| s.constant(Tensor::row(v.clone())).unwrap()).collect();
    let l = mae_loss(&mut s, &pv, &tv).unwrap();
    let plain = parkcast_core::training::mae(&p, &t).unwrap();
    let want = mae_ref(&p, &t);
    (s.value(l).data()[0] - want).abs().max((plain - want).abs())
}

/// Registry of single-lot streets scattered over a few hundred meters.
pub fn scattered_registry(r: &mut ChaCha8Rng, k: usize, span_m: f64) -> LotRegistry {
    let deg = span_m / 111_000.0;
    let lots = (0..k)
        .map(|i| Lot {
            lot_id: format!("L{i:02}"),
            lat: 43.46 + r.random_range(0.0..deg),
            lon: -3.81 + r.random_range(0.0..deg * 1.4),
            street: format!("S{i:02}"),
        })
        .collect();
    LotRegistry::new(lots).unwrap()
}

/// Edge-set mismatches against an all-pairs great-circle check. Pairs
/// within a millimeter of the threshold are accepted either way.
pub fn graph_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let reg = scattered_registry(&mut r, 27, 400.0);
    let map = cluster_lots(&reg).unwrap();
    let g = build_graph(&map, 95.0).unwrap();
    let mut mismatches = 0;
    for u in 0..27 {
        for v in u + 1..27 {
            let d = haversine_m(map.centroids[u], map.centroids[v]);
            if (d - 95.0).abs() < 1e-3 {
                continue;
            }
            if (d <= 95.0) != g.has_edge(u, v) {
                mismatches += 1;
            }
        }
    }
    mismatches as f64
}

pub fn normalization_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let streets = r.random_range(1..8);
    let n_lots = r.random_range(streets..40);
    let lots: Vec<Lot> = (0..n_lots)
        .map(|i| Lot {
            lot_id: format!("lot{i}"),
            lat: 43.0,
            lon: -3.0,
            street: if i < streets {
                format!("street-{}", (b'a' + i as u8) as char)
            } else {
                format!("street-{}", (b'a' + r.random_range(0..streets) as u8) as char)
            },
        })
        .collect();
    let reg = LotRegistry::new(lots.clone()).unwrap();
    let map = cluster_lots(&reg).unwrap();
    let frames: Vec<AvailabilityFrame> = (0..10)
        .map(|t| AvailabilityFrame {
            step_index: t,
            values: (0..n_lots).map(|_| r.random_range(0..2u8)).collect(),
        })
        .collect();
    let got = normalize(&frames, &map).unwrap();

    let names: BTreeSet<&str> = lots.iter().map(|l| l.street.as_str()).collect();
    let mut worst: f64 = 0.0;
    for (f, v) in frames.iter().zip(&got) {
        for (k, name) in names.iter().enumerate() {
            let members: Vec<usize> = (0..n_lots).filter(|&i| lots[i].street == *name).collect();
            let free = members.iter().filter(|&&i| f.values[i] == 1).count();
            let want = free as f64 / members.len() as f64;
            worst = worst.max((v.values[k] - want).abs());
            let back = denormalize(&v.values, &map).unwrap();
            worst = worst.max((back[k] - v.values[k] * members.len() as f64).abs());
        }
    }
    worst
}

/// Mismatched (lot, tick) cells against scanning every event per cell.
pub fn resampling_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n_lots = r.random_range(1..6);
    let lots: Vec<Lot> = (0..n_lots)
        .map(|i| Lot {
            lot_id: format!("L{i}"),
            lat: 43.0,
            lon: -3.0,
            street: "s".into(),
        })
        .collect();
    let reg = LotRegistry::new(lots).unwrap();
    let start = Utc.with_ymd_and_hms(2014, 6, 2, 0, 0, 0).unwrap();
    let week = 7 * 24 * 3600;
    let mut events = Vec::new();
    for i in 0..n_lots {
        let mut secs: BTreeSet<i64> = BTreeSet::new();
        secs.insert(-r.random_range(0..3600));
        for _ in 0..r.random_range(0..200) {
            secs.insert(r.random_range(-3600..week));
        }
        for s in secs {
            events.push(ParkingEvent {
                lot_id: format!("L{i}"),
                timestamp: start + Duration::seconds(s),
                status: if r.random_bool(0.5) { Status::Free } else { Status::Occupied },
            });
        }
    }
    events.sort_by(|a, b| (a.timestamp, &a.lot_id).cmp(&(b.timestamp, &b.lot_id)));
    let range = TimeRange {
        start,
        end: start + Duration::seconds(week),
    };
    let got = resample(&events, &reg, range, Duration::minutes(15)).unwrap();
    if got.frames.len() != 672 {
        return f64::INFINITY;
    }
    let mut mismatches = 0;
    for (t, frame) in got.frames.iter().enumerate() {
        let tick: DateTime<Utc> = start + Duration::minutes(15 * t as i64);
        for i in 0..n_lots {
            let id = format!("L{i}");
            let mut state = None;
            let mut when = None;
            for e in &events {
                if e.lot_id == id && e.timestamp <= tick && when.is_none_or(|w| e.timestamp >= w) {
                    state = Some(e.status.availability());
                    when = Some(e.timestamp);
                }
            }
            if state != Some(frame.values[i]) {
                mismatches += 1;
            }
        }
    }
    mismatches as f64
}

// ---------------------------------------------------------------------------
// finite differences

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-4;

/// Largest `|g − g_fd| / max(1, |g_fd|)` over parameters of `store`.
///
/// `limit` caps the entries checked per tensor (evenly spaced); `None`
/// checks every entry.
pub fn grad_check<G>(store: &mut ParamStore<f64>, limit: Option<usize>, loss: G) -> f64
where
    G: Fn(&mut Session<'_, f64>) -> Result<Var>,
{
    let analytic = {
        let mut s = Session::new(store);
        let l = loss(&mut s).unwrap();
        s.backward(l).unwrap()
    };
    let eval = |store: &ParamStore<f64>| {
        let mut s = Session::new(store);
        let l = loss(&mut s).unwrap();
        s.value(l).data()[0]
    };
    let ids: Vec<_> = store.ids().collect();
    let mut worst: f64 = 0.0;
    for (pi, id) in ids.into_iter().enumerate() {
        let n = store.get(id).len();
        let picks: Vec<usize> = match limit {
            Some(m) if m < n => (0..m).map(|i| i * n / m).collect(),
            _ => (0..n).collect(),
        };
        for j in picks {
            let orig = store.get(id).data()[j];
            store.get_mut(id).data_mut()[j] = orig + FD_STEP;
            let up = eval(store);
            store.get_mut(id).data_mut()[j] = orig - FD_STEP;
            let down = eval(store);
            store.get_mut(id).data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * FD_STEP);
            let g = analytic[pi][j];
            worst = worst.max((g - fd).abs() / fd.abs().max(1.0));
        }
    }
    worst
}

/// Fixed random weighting that turns any output into a scalar loss.
pub fn weighted_sum(s: &mut Session<'_, f64>, v: Var, seed: u64) -> Result<Var> {
    let n = s.value(v).len();
    let w = uniform(&mut rng(seed ^ 0x5eed), n, -1.0, 1.0);
    let y = s.tape.mul_const(v, w)?;
    s.tape.sum(y)
}

/// Per-street grouping used by several tests.
pub fn group_by_street(reg: &LotRegistry) -> BTreeMap<String, Vec<usize>> {
    let mut m: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, l) in reg.lots().iter().enumerate() {
        m.entry(l.street.clone()).or_default().push(i);
    }
    m
}

// ---------------------------------------------------------------------------
// gradient instances; each returns the worst relative error

use parkcast_core::encoders::{ConvSpec, EncoderKind, GnnConfig};
use parkcast_core::model::{ModelConfig, Seq2Seq};
use parkcast_core::nn::{dropout, lstm_step, Mode};

pub fn conv_grad_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (c, len) = (r.random_range(1..4), r.random_range(4..12));
    let full = seed % 2 == 1;
    let f = if full { len } else { r.random_range(1..=len.min(5)) };
    let stride = if full { Stride::FullSpan } else { Stride::Step(r.random_range(1..3)) };
    let mut store = ParamStore::new();
    let p = ConvParams::new(&mut store, "c", c, r.random_range(1..4), f, stride, &mut r);
    let x = store.push("x", Tensor::zeros(&[2, c, len]));
    randomize(&mut store, &mut r, 1.0);
    grad_check(&mut store, None, |s| {
        let xv = s.param(x)?;
        let y = conv1d_gated(s, xv, &p)?;
        weighted_sum(s, y, seed)
    })
}

pub fn ggnn_propagate_grad_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let k = r.random_range(2..6);
    let hd = r.random_range(1..5);
    let graph = random_graph(&mut r, k, 0.6);
    let mut store = ParamStore::new();
    let p = GgnnParams::new(&mut store, "g", hd, 2, 3, r.random_range(1..4), &mut r);
    let h0 = store.push("h0", Tensor::zeros(&[k, hd]));
    randomize(&mut store, &mut r, 0.8);
    grad_check(&mut store, None, |s| {
        let h = s.param(h0)?;
        let y = ggnn_propagate(s, h, &graph, &p)?;
        weighted_sum(s, y, seed)
    })
}

pub fn ggnn_output_grad_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (k, hd, ad, od) = (r.random_range(1..5), r.random_range(1..5), r.random_range(1..4), r.random_range(1..4));
    let mut store = ParamStore::new();
    let p = GgnnParams::new(&mut store, "g", hd, ad, od, 0, &mut r);
    let h = store.push("h", Tensor::zeros(&[k, hd]));
    let a = store.push("a", Tensor::zeros(&[k, ad]));
    randomize(&mut store, &mut r, 0.8);
    grad_check(&mut store, None, |s| {
        let (hv, av) = (s.param(h)?, s.param(a)?);
        let y = ggnn_output(s, hv, av, &p)?;
        weighted_sum(s, y, seed)
    })
}

pub fn lstm_step_grad_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (k, hd) = (r.random_range(1..5), r.random_range(1..5));
    let mut store = ParamStore::new();
    let cell = LstmCell::new(&mut store, "d", k, hd, Some(r.random_range(1..4)), Some((4, 2)), &mut r);
    let head = Dense::new(&mut store, "out", hd, k, &mut r);
    let h = store.push("h", Tensor::zeros(&[1, hd]));
    let c = store.push("c", Tensor::zeros(&[1, hd]));
    let x = store.push("x", Tensor::zeros(&[1, k]));
    let d = store.push("d", Tensor::zeros(&[1, 4]));
    randomize(&mut store, &mut r, 0.8);
    grad_check(&mut store, None, |s| {
        let (hv, cv, xv, dv) = (s.param(h)?, s.param(c)?, s.param(x)?, s.param(d)?);
        let (h2, c2, out) = lstm_step(s, &cell, &head, hv, cv, xv, dv)?;
        let a = weighted_sum(s, h2, seed)?;
        let b = weighted_sum(s, c2, seed + 1)?;
        let o = weighted_sum(s, out, seed + 2)?;
        let ab = s.tape.add(a, b)?;
        s.tape.add(ab, o)
    })
}

/// Small GNN model configuration whose every parameter can be
/// finite-differenced quickly.
pub fn tiny_gnn_config(clusters: usize, history: usize) -> ModelConfig {
    let mut cfg = ModelConfig::new(EncoderKind::Gnn, history, clusters);
    cfg.encoder.gnn = GnnConfig {
        annotation_conv: ConvSpec::new(1, 2, 1),
        hidden_conv: ConvSpec::new(2, 4, 2),
        pad_len: history + 2,
        propagation_steps: 3,
        node_output_dim: 3,
        trailing: vec![ConvSpec::new(2, 3, 2), ConvSpec::full_span(6, (clusters * 3 - 3) / 2 + 1)],
    };
    cfg.encoder.output_dim = 6;
    cfg.decoder = DecoderConfig {
        hidden: 6,
        layers: 1,
        input_embed: 3,
        calendar_embed: 2,
    };
    cfg
}

pub fn random_vectors(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<ClusterVector> {
    (0..n)
        .map(|t| ClusterVector {
            step_index: t as i64,
            values: uniform(r, k, 0.0, 1.0),
        })
        .collect()
}

/// Encoder, dropout on the code, partially teacher-forced decode and MAE.
pub fn composite_grad_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (k, m, n) = (4, 8, 3);
    let graph = random_graph(&mut r, k, 0.6);
    let mut model = Seq2Seq::<f64>::new(tiny_gnn_config(k, m), graph, seed).unwrap();
    randomize(&mut model.store, &mut r, 0.6);
    let input = random_vectors(&mut r, m, k);
    let targets = random_vectors(&mut r, n, k);
    let cal = random_calendar(&mut r, n);
    let active = vec![false, true, false];
    let mut store = model.store.clone();
    grad_check(&mut store, None, |s| {
        let teacher = Teacher {
            targets: &targets,
            active: active.clone(),
        };
        let mut drop_rng = rng(seed + 100);
        let preds = model.forward(s, &input, &cal, n, Some(&teacher), 0.3, Mode::Train, &mut drop_rng)?;
        let tv = targets
            .iter()
            .map(|t| s.constant(Tensor::row(t.values.clone())))
            .collect::<Result<Vec<_>>>()?;
        mae_loss(s, &preds, &tv)
    })
}

/// Exercises dropout on its own so its mask path is covered.
pub fn dropout_grad_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut store = ParamStore::new();
    let x = store.push("x", Tensor::zeros(&[3, 4]));
    randomize(&mut store, &mut r, 1.0);
    grad_check(&mut store, None, |s| {
        let xv = s.param(x)?;
        let y = dropout(s, xv, 0.3, Mode::Train, &mut rng(seed))?;
        weighted_sum(s, y, seed)
    })
}

/// Reduced GNN used for desk-scale runs: a narrower node head and a
/// shorter trailing chain, same structure as the nominal encoder.
pub fn desk_gnn_config(clusters: usize, history: usize) -> ModelConfig {
    let mut cfg = ModelConfig::new(EncoderKind::Gnn, history, clusters);
    cfg.encoder.gnn.node_output_dim = 8;
    cfg.encoder.gnn.trailing = vec![ConvSpec::new(8, 4, 2), ConvSpec::new(16, 5, 3), ConvSpec::full_span(24, 35)];
    cfg.encoder.output_dim = 24;
    cfg.decoder.hidden = 24;
    cfg.decoder.input_embed = 16;
    cfg
}
