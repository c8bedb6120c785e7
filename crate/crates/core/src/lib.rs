//! Dual-amplifier EEG comparison toolkit.

pub mod classify;
pub mod compare;
pub mod dsp;
pub mod gdf_io;
mod linalg;
pub mod pipeline;
pub mod recording;
pub mod spatial;
pub mod synth;

pub use recording::{Event, EventCode, EventList, Recording, RecordingError, MONTAGE_16};
