use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::data::LotRegistry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Occupied,
    Free,
}

impl Status {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "free" => Some(Status::Free),
            "occupied" => Some(Status::Occupied),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Free => "free",
            Status::Occupied => "occupied",
        }
    }

    /// 1 when the lot is available.
    pub fn availability(self) -> u8 {
        match self {
            Status::Free => 1,
            Status::Occupied => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParkingEvent {
    pub lot_id: String,
    pub timestamp: DateTime<Utc>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowRejection {
    /// 1-based line number in the input, header included.
    pub line: u64,
    pub reason: String,
}

/// Parsed events plus the rows that were skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<ParkingEvent>,
    pub rejected: Vec<RowRejection>,
}

const MAX_REJECTED_FRACTION: f64 = 0.10;

/// Parses the `lot_id,timestamp,status` CSV format.
///
/// Rows naming unknown lots, or carrying unparsable timestamps or statuses,
/// are skipped and reported. More than 10% rejected rows is a hard error.
/// Events come back sorted by `(timestamp, lot_id)`.
pub fn parse_event_log<R: Read>(reader: R, registry: &LotRegistry) -> Result<EventLog> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let mut log = EventLog::default();
    let mut total = 0usize;
    for record in rdr.records() {
        total += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                log.rejected.push(RowRejection {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&record, registry) {
            Ok(ev) => log.events.push(ev),
            Err(reason) => log.rejected.push(RowRejection { line, reason }),
        }
    }
    if !log.rejected.is_empty() {
        for r in &log.rejected {
            log::debug!("rejected event row {}: {}", r.line, r.reason);
        }
        if log.rejected.len() as f64 > MAX_REJECTED_FRACTION * total as f64 {
            let first = &log.rejected[0];
            return Err(Error::TooManyRejected {
                rejected: log.rejected.len(),
                total,
                first: format!("line {}: {}", first.line, first.reason),
            });
        }
        log::warn!("{} of {} event rows rejected", log.rejected.len(), total);
    }
    log.events
        .sort_by(|a, b| (a.timestamp, &a.lot_id).cmp(&(b.timestamp, &b.lot_id)));
    Ok(log)
}

fn parse_row(record: &csv::StringRecord, registry: &LotRegistry) -> std::result::Result<ParkingEvent, String> {
    if record.len() != 3 {
        return Err(format!("expected 3 fields, found {}", record.len()));
    }
    let lot_id = record[0].trim();
    if registry.position(lot_id).is_none() {
        return Err(format!("unknown lot id {lot_id:?}"));
    }
    let timestamp = DateTime::parse_from_rfc3339(record[1].trim())
        .map_err(|e| format!("bad timestamp {:?}: {e}", &record[1]))?
        .with_timezone(&Utc);
    let status = Status::parse(record[2].trim()).ok_or_else(|| format!("bad status {:?}", &record[2]))?;
    Ok(ParkingEvent {
        lot_id: lot_id.to_string(),
        timestamp,
        status,
    })
}

pub fn write_event_log<W: Write>(events: &[ParkingEvent], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lot_id", "timestamp", "status"])?;
    for ev in events {
        w.write_record([
            ev.lot_id.as_str(),
            &ev.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            ev.status.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
