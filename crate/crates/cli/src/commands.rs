//! One function per subcommand.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use parkcast_core::data::{
    first_tick, generate_synthetic, parse_event_log, read_frames_for, resample, split_by_fractions, write_event_log,
    write_frames, FrameSeries, LotRegistry, TimeRange, STEP_MINUTES,
};
use parkcast_core::training::{evaluate, train, ArBaseline, SeasonalNaive};
use parkcast_core::{Checkpoint, Dataset, EvalReport, Forecaster, Model};
use serde::{Deserialize, Serialize};

use crate::buffer::RollingBuffer;
use crate::cli::{Cli, Command, DataArgs, EvalArgs, IngestArgs, PredictArgs, ServeArgs, SynthArgs, TrainArgs};
use crate::config::AppConfig;
use crate::error::{AppError, AppResult};
use crate::forecast::Predictor;
use crate::service::{router, run_feed, AppState};

struct Ctx {
    cfg: AppConfig,
    out: PathBuf,
    seed: u64,
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Flag, then config path, then the default name under `--out`.
    fn input(&self, flag: &Option<PathBuf>, configured: &Option<PathBuf>, name: &str) -> PathBuf {
        flag.clone().or_else(|| configured.clone()).unwrap_or_else(|| self.out(name))
    }
}

fn open(path: &Path) -> AppResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| AppError::File {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> AppResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| AppError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Grid of a frame file, stored next to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramesMeta {
    pub epoch: DateTime<Utc>,
    pub interval_minutes: i64,
}

pub fn meta_path(frames: &Path) -> PathBuf {
    frames.with_extension("json")
}

pub fn run(cli: Cli) -> AppResult<()> {
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    let seed = cfg.train.seed;
    fs::create_dir_all(&cli.out).map_err(|source| AppError::File {
        path: cli.out.display().to_string(),
        source,
    })?;
    let ctx = Ctx { cfg, out: cli.out, seed };
    match cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Preprocess(a) => preprocess(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
    }
}

fn synth(ctx: &Ctx, a: SynthArgs) -> AppResult<()> {
    let mut spec = ctx.cfg.synth.clone();
    spec.weeks = a.weeks.unwrap_or(spec.weeks);
    spec.clusters = a.clusters.unwrap_or(spec.clusters);
    let (registry, events) = generate_synthetic(&spec, ctx.seed)?;
    registry.to_csv(create(&ctx.out("lots.csv"))?)?;
    write_event_log(&events, create(&ctx.out("events.csv"))?)?;
    log::info!(
        "{} lots in {} clusters, {} events over {} weeks",
        registry.len(),
        spec.clusters,
        events.len(),
        spec.weeks
    );
    Ok(())
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> AppResult<()> {
    let paths = &ctx.cfg.paths;
    let registry = LotRegistry::from_csv(open(&ctx.input(&a.lots, &paths.lots, "lots.csv"))?)?;
    let log = parse_event_log(open(&ctx.input(&a.events, &paths.events, "events.csv"))?, &registry)?;
    if !log.rejected.is_empty() {
        let mut w = create(&ctx.out("rejected.csv"))?;
        writeln!(w, "line,reason")?;
        for r in &log.rejected {
            writeln!(w, "{},\"{}\"", r.line, r.reason.replace('"', "'"))?;
        }
        log::warn!("{} rows rejected, listed in rejected.csv", log.rejected.len());
    }
    let (Some(first), Some(last)) = (log.events.first(), log.events.last()) else {
        return Err(AppError::Usage("event log has no usable rows".into()));
    };
    let interval = Duration::minutes(STEP_MINUTES);
    let range = TimeRange {
        start: a.start.unwrap_or(first.timestamp),
        end: a.end.unwrap_or_else(|| first_tick(last.timestamp, interval) + interval),
    };
    let frames = resample(&log.events, &registry, range, interval)?;
    let path = ctx.out("frames.csv");
    write_frames(&frames.frames, &registry, create(&path)?)?;
    let meta = FramesMeta {
        epoch: frames.epoch,
        interval_minutes: STEP_MINUTES,
    };
    serde_json::to_writer_pretty(create(&meta_path(&path))?, &meta)?;
    log::info!("{} frames from {}", frames.len(), frames.epoch.to_rfc3339());
    Ok(())
}

fn load_frames(ctx: &Ctx, a: &DataArgs) -> AppResult<(LotRegistry, FrameSeries)> {
    let paths = &ctx.cfg.paths;
    let registry = LotRegistry::from_csv(open(&ctx.input(&a.lots, &paths.lots, "lots.csv"))?)?;
    let frames_path = ctx.input(&a.frames, &paths.frames, "frames.csv");
    let ids: Vec<&str> = registry.lots().iter().map(|l| l.lot_id.as_str()).collect();
    let frames = read_frames_for(open(&frames_path)?, &ids)?;
    let meta: FramesMeta = serde_json::from_reader(open(&meta_path(&frames_path))?)?;
    Ok((
        registry,
        FrameSeries {
            epoch: meta.epoch,
            interval: Duration::minutes(meta.interval_minutes),
            frames,
        },
    ))
}

fn load_dataset(ctx: &Ctx, a: &DataArgs) -> AppResult<Dataset> {
    let (registry, frames) = load_frames(ctx, a)?;
    let split = split_by_fractions(frames.len(), ctx.cfg.split.validation_at, ctx.cfg.split.test_at)?;
    Ok(Dataset::from_frames(&registry, &frames, split)?)
}

fn preprocess(ctx: &Ctx, a: DataArgs) -> AppResult<()> {
    let d = load_dataset(ctx, &a)?;
    d.map.to_csv(create(&ctx.out("clusters.csv"))?)?;
    d.graph.to_json(create(&ctx.out("graph.json"))?)?;
    let mut w = create(&ctx.out("series.csv"))?;
    let header: Vec<String> = (0..d.clusters()).map(|k| format!("c{k}")).collect();
    writeln!(w, "step_index,timestamp,{}", header.join(","))?;
    for v in &d.series.vectors {
        let values: Vec<String> = v.values.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{},{},{}", v.step_index, d.series.timestamp(v.step_index).to_rfc3339(), values.join(","))?;
    }
    w.flush()?;
    log::info!(
        "{} clusters, {} edges, split {:?} / {:?} / {:?}",
        d.clusters(),
        d.graph.edges.len(),
        d.split.train,
        d.split.validation,
        d.split.test
    );
    Ok(())
}

fn train_cmd(ctx: &Ctx, a: TrainArgs) -> AppResult<()> {
    let mut cfg = ctx.cfg.clone();
    if let Some(kind) = a.kind {
        cfg.model.kind = kind;
    }
    if let Some(epochs) = a.epochs {
        cfg.train.epochs = epochs;
    }
    let d = load_dataset(ctx, &a.data)?;
    let model_cfg = cfg.model_config(d.clusters())?;
    let mut model = Model::new(model_cfg, d.graph.clone(), ctx.seed)?;
    let (m, n) = (cfg.train.history_len, cfg.train.n_max);
    let outcome = train(&mut model, &d.train_windows(m, n), &d.validation_windows(m, n), &cfg.train)?;

    outcome.history.to_csv(create(&ctx.out("history.csv"))?)?;
    fs::write(ctx.out("history.svg"), outcome.history.to_svg())?;
    let ck = Checkpoint {
        model,
        map: d.map.clone(),
        train: cfg.train.clone(),
        history_digest: outcome.history.digest(),
        series_epoch: d.series.epoch,
    };
    ck.save(ctx.out("model.ckpt"))?;
    println!(
        "{}: best epoch {} of {}, validation MAE {:.5}",
        ck.model_id()?,
        outcome.best_epoch,
        cfg.train.epochs,
        outcome.best_val_mae
    );
    Ok(())
}

fn load_checkpoint(ctx: &Ctx, flag: &Option<PathBuf>) -> AppResult<Checkpoint> {
    let path = ctx.input(flag, &ctx.cfg.paths.checkpoint, "model.ckpt");
    let bytes = fs::read(&path).map_err(|source| AppError::File {
        path: path.display().to_string(),
        source,
    })?;
    Ok(Checkpoint::from_bytes(&bytes)?)
}

fn eval(ctx: &Ctx, a: EvalArgs) -> AppResult<()> {
    let ck = load_checkpoint(ctx, &a.checkpoint)?;
    let d = load_dataset(ctx, &a.data)?;
    if d.map != ck.map {
        return Err(AppError::Usage("frames were not clustered like the checkpoint's training data".into()));
    }
    let windows = d.test_windows(ck.model.history_len(), ck.train.n_max);
    let mut forecasters: Vec<Box<dyn Forecaster>> = vec![Box::new(ck.model.clone())];
    match ArBaseline::fit(&d.series, d.split.train.clone(), 4) {
        Ok(ar) => forecasters.push(Box::new(ar)),
        Err(e) => log::warn!("AR(4) baseline skipped: {e}"),
    }
    forecasters.push(Box::new(SeasonalNaive { period: 96 }));
    forecasters.push(Box::new(SeasonalNaive { period: 672 }));

    let mut reports: Vec<EvalReport> = Vec::new();
    for f in &forecasters {
        match evaluate(f.as_ref(), &windows, &d.map) {
            Ok(r) => reports.push(r),
            Err(e) if reports.is_empty() => return Err(e.into()),
            Err(e) => log::warn!("{} skipped: {e}", f.id()),
        }
    }
    reports[0].to_csv(create(&ctx.out("report.csv"))?)?;
    for r in &reports[1..] {
        r.to_csv(create(&ctx.out(&format!("report_{}.csv", r.model)))?)?;
    }
    serde_json::to_writer_pretty(create(&ctx.out("report.json"))?, &reports)?;

    let mins: Vec<String> = reports[0].horizon_minutes().iter().map(|m| format!("{m:>8}")).collect();
    println!("{:<22}{}  (city-wide MAE, lots; minutes ahead)", "model", mins.join(""));
    for r in &reports {
        let v: Vec<String> = r.city.iter().map(|x| format!("{x:>8.3}")).collect();
        println!("{:<22}{}", r.model, v.join(""));
    }
    for note in reports.iter().filter_map(|r| r.note.as_ref()) {
        println!("note: {note}");
    }
    Ok(())
}

/// Buffer filled from a frame file, with step indices moved onto the
/// checkpoint's grid.
pub fn buffer_from_frames(ck: &Checkpoint, frames_path: &Path) -> AppResult<RollingBuffer> {
    let frames = read_frames_for(open(frames_path)?, &ck.map.lot_ids)?;
    let shift = match open(&meta_path(frames_path)) {
        Ok(r) => {
            let meta: FramesMeta = serde_json::from_reader(r)?;
            (meta.epoch - ck.series_epoch).num_minutes() / STEP_MINUTES
        }
        Err(_) => 0,
    };
    let buffer = RollingBuffer::new();
    for mut v in parkcast_core::preprocess::normalize(&frames, &ck.map)? {
        v.step_index += shift;
        buffer.push(v);
    }
    Ok(buffer)
}

fn predict(ctx: &Ctx, a: PredictArgs) -> AppResult<()> {
    let ck = load_checkpoint(ctx, &a.checkpoint)?;
    let buffer = buffer_from_frames(&ck, &ctx.input(&a.frames, &ctx.cfg.paths.frames, "frames.csv"))?;
    let predictor = Predictor::new(ck)?;
    let p = predictor
        .predict(&buffer.snapshot(), a.horizon)
        .map_err(|e| AppError::Usage(e.to_string()))?;
    let text = serde_json::to_string_pretty(&p)?;
    fs::write(ctx.out("prediction.json"), &text)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn serve(ctx: &Ctx, a: ServeArgs) -> AppResult<()> {
    let ck = load_checkpoint(ctx, &a.checkpoint)?;
    let state = AppState::new(Predictor::new(ck)?);
    let port = a.port.unwrap_or(ctx.cfg.serve.port);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let feed_state = state.clone();
        let feed = a.feed.clone();
        let follow = !a.no_follow;
        tokio::spawn(async move {
            let result = if feed == "-" {
                run_feed(feed_state, tokio::io::BufReader::new(tokio::io::stdin()), false).await
            } else {
                match tokio::fs::File::open(&feed).await {
                    Ok(f) => run_feed(feed_state, tokio::io::BufReader::new(f), follow).await,
                    Err(e) => Err(e.into()),
                }
            };
            match result {
                Ok(()) => log::info!("feed ended"),
                Err(e) => log::error!("feed stopped: {e}"),
            }
        });
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        log::info!("serving {} on port {port}", state.predictor.model_id);
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}
