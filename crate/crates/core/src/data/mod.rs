//! Raw sensor data: lot registry, event logs, 15-minute resampling,
//! calendar features, chronological splits and synthetic datasets.

mod calendar;
mod events;
mod registry;
mod resample;
mod split;
mod synth;

pub use calendar::{calendar_features, CalendarFeature};
pub use events::{parse_event_log, write_event_log, EventLog, ParkingEvent, RowRejection, Status};
pub use registry::{Lot, LotRegistry};
pub use resample::{
    check_frame_header, first_tick, parse_frame_fields, read_frames, read_frames_for, resample, write_frames, AvailabilityFrame, FrameSeries, TimeRange,
    STEP_MINUTES,
};
pub use split::{split_by_fractions, split_dataset, DatasetSplit};
pub use synth::{generate_synthetic, SynthSpec};
