use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

/// Time-of-day, day-of-month, month and weekday, each scaled to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalendarFeature {
    pub time_of_day: f64,
    pub day_of_month: f64,
    pub month: f64,
    pub weekday: f64,
}

impl CalendarFeature {
    pub fn to_array(self) -> [f64; 4] {
        [self.time_of_day, self.day_of_month, self.month, self.weekday]
    }
}

/// Min-max scaled calendar encoding: quarter-hour of day over 95, day of
/// month minus one over 30, month minus one over 11, weekday (Monday = 0)
/// over 6.
pub fn calendar_features(ts: DateTime<Utc>) -> CalendarFeature {
    let quarter = (ts.hour() * 60 + ts.minute()) / 15;
    CalendarFeature {
        time_of_day: quarter as f64 / 95.0,
        day_of_month: (ts.day() - 1) as f64 / 30.0,
        month: ts.month0() as f64 / 11.0,
        weekday: ts.weekday().num_days_from_monday() as f64 / 6.0,
    }
}
