use std::ops::Range;

use chrono::{DateTime, Duration, Utc};

use crate::error::{Error, Result};

/// Contiguous chronological train / validation / test frame ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

/// Splits `n_frames` ticks starting at `epoch` at two dates.
///
/// A frame belongs to the first range whose end boundary lies strictly
/// after its tick.
pub fn split_dataset(
    n_frames: usize,
    epoch: DateTime<Utc>,
    interval: Duration,
    validation_start: DateTime<Utc>,
    test_start: DateTime<Utc>,
) -> Result<DatasetSplit> {
    let end = epoch + interval * n_frames as i32;
    if validation_start < epoch || test_start > end {
        return Err(Error::Config(format!(
            "split boundaries {validation_start} / {test_start} outside data range {epoch} .. {end}"
        )));
    }
    if validation_start > test_start {
        return Err(Error::Config(format!(
            "validation start {validation_start} is after test start {test_start}"
        )));
    }
    let index = |b: DateTime<Utc>| -> usize {
        let secs = (b - epoch).num_seconds();
        let step = interval.num_seconds();
        (((secs + step - 1) / step) as usize).min(n_frames)
    };
    let v = index(validation_start);
    let t = index(test_start);
    Ok(DatasetSplit {
        train: 0..v,
        validation: v..t,
        test: t..n_frames,
    })
}

/// Splits at fractional positions, e.g. `0.7, 0.85`.
pub fn split_by_fractions(n_frames: usize, validation_at: f64, test_at: f64) -> Result<DatasetSplit> {
    if !(0.0..=1.0).contains(&validation_at) || !(validation_at..=1.0).contains(&test_at) {
        return Err(Error::Config(format!(
            "split fractions {validation_at} / {test_at} must be ordered within [0, 1]"
        )));
    }
    let v = (n_frames as f64 * validation_at).round() as usize;
    let t = (n_frames as f64 * test_at).round() as usize;
    Ok(DatasetSplit {
        train: 0..v,
        validation: v..t,
        test: t..n_frames,
    })
}
