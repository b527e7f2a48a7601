use std::io::{Read, Write};

use chrono::{DateTime, Duration, TimeZone, Utc};

use crate::data::{LotRegistry, ParkingEvent};
use crate::error::{Error, Result};

/// Sampling interval of every frame sequence.
pub const STEP_MINUTES: i64 = 15;

/// Half-open UTC interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeRange {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

/// Per-lot 0/1 availability at one tick (1 = free).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvailabilityFrame {
    pub step_index: i64,
    pub values: Vec<u8>,
}

/// Frames on a regular grid anchored at `epoch` (step 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSeries {
    pub epoch: DateTime<Utc>,
    pub interval: Duration,
    pub frames: Vec<AvailabilityFrame>,
}

impl FrameSeries {
    pub fn timestamp(&self, step_index: i64) -> DateTime<Utc> {
        self.epoch + self.interval * step_index as i32
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// First interval boundary (aligned to the Unix epoch) at or after `t`.
pub fn first_tick(t: DateTime<Utc>, interval: Duration) -> DateTime<Utc> {
    let step = interval.num_seconds();
    let secs = t.timestamp();
    let mut aligned = secs.div_euclid(step) * step;
    if aligned < secs || (aligned == secs && t.timestamp_subsec_nanos() > 0) {
        aligned += step;
    }
    Utc.timestamp_opt(aligned, 0).single().expect("tick within chrono range")
}

/// Forward-fills each lot's last reported status onto a regular grid.
///
/// `events` must be sorted by timestamp. Every lot needs an event at or
/// before the first tick.
pub fn resample(
    events: &[ParkingEvent],
    registry: &LotRegistry,
    range: TimeRange,
    interval: Duration,
) -> Result<FrameSeries> {
    if interval <= Duration::zero() {
        return Err(Error::Config("resampling interval must be positive".into()));
    }
    let epoch = first_tick(range.start, interval);
    let mut series = FrameSeries {
        epoch,
        interval,
        frames: Vec::new(),
    };
    if epoch >= range.end {
        return Ok(series);
    }
    if events.windows(2).any(|w| w[0].timestamp > w[1].timestamp) {
        return Err(Error::Data("events are not sorted by timestamp".into()));
    }

    let mut state: Vec<Option<u8>> = vec![None; registry.len()];
    let mut next = 0;
    let mut tick = epoch;
    let mut step = 0i64;
    while tick < range.end {
        while next < events.len() && events[next].timestamp <= tick {
            let ev = &events[next];
            let pos = registry
                .position(&ev.lot_id)
                .ok_or_else(|| Error::Data(format!("event for unknown lot {}", ev.lot_id)))?;
            state[pos] = Some(ev.status.availability());
            next += 1;
        }
        if step == 0 {
            if let Some(i) = state.iter().position(Option::is_none) {
                return Err(Error::MissingLeadingState {
                    lot_id: registry.lots()[i].lot_id.clone(),
                    at: tick.to_rfc3339(),
                });
            }
        }
        series.frames.push(AvailabilityFrame {
            step_index: step,
            values: state.iter().map(|s| s.unwrap_or(0)).collect(),
        });
        step += 1;
        tick += interval;
    }
    Ok(series)
}

/// Writes the `step_index,<lot_id...>` frame dump.
pub fn write_frames<W: Write>(frames: &[AvailabilityFrame], registry: &LotRegistry, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["step_index".to_string()];
    header.extend(registry.lots().iter().map(|l| l.lot_id.clone()));
    w.write_record(&header)?;
    for f in frames {
        if f.values.len() != registry.len() {
            return Err(Error::Data(format!(
                "frame {} has {} values for {} lots",
                f.step_index,
                f.values.len(),
                registry.len()
            )));
        }
        let mut row = Vec::with_capacity(f.values.len() + 1);
        row.push(f.step_index.to_string());
        row.extend(f.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a frame dump whose columns match `registry` order.
pub fn read_frames<R: Read>(reader: R, registry: &LotRegistry) -> Result<Vec<AvailabilityFrame>> {
    let ids: Vec<&str> = registry.lots().iter().map(|l| l.lot_id.as_str()).collect();
    read_frames_for(reader, &ids)
}

/// Reads a frame dump whose lot columns are exactly `lot_ids`.
pub fn read_frames_for<R: Read, S: AsRef<str>>(reader: R, lot_ids: &[S]) -> Result<Vec<AvailabilityFrame>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_frame_header(rdr.headers()?.iter(), lot_ids)?;
    let mut frames = Vec::new();
    for record in rdr.records() {
        let record = record?;
        frames.push(parse_frame_fields(record.iter(), lot_ids.len())?);
    }
    Ok(frames)
}

/// Checks a `step_index,<lot_id...>` header against the expected lots.
pub fn check_frame_header<'a, S: AsRef<str>>(header: impl Iterator<Item = &'a str>, lot_ids: &[S]) -> Result<()> {
    let expected = std::iter::once("step_index").chain(lot_ids.iter().map(|s| s.as_ref()));
    if !header.map(str::trim).eq(expected) {
        return Err(Error::Data("frame header does not match the lot registry".into()));
    }
    Ok(())
}

/// Parses one frame row: a step index followed by `n_lots` 0/1 cells.
pub fn parse_frame_fields<'a>(mut fields: impl Iterator<Item = &'a str>, n_lots: usize) -> Result<AvailabilityFrame> {
    let step_index = fields
        .next()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .ok_or_else(|| Error::Data("frame row without a step index".into()))?;
    let values = fields
        .map(|c| match c.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(Error::Data(format!("frame {step_index}: cell {other:?} is not 0/1"))),
        })
        .collect::<Result<Vec<u8>>>()?;
    if values.len() != n_lots {
        return Err(Error::Data(format!(
            "frame {step_index} has {} values for {n_lots} lots",
            values.len()
        )));
    }
    Ok(AvailabilityFrame { step_index, values })
}
