//! Per-channel preprocessing: filtering, rate conversion, epoching and
//! spectral estimation.
//!
//! Every operation is linear and time-invariant per channel (except the
//! log-power features), and channels are processed independently; results do
//! not depend on whether channels run in parallel.

mod epochs;
mod filter;
mod resample;
mod spectral;

use thiserror::Error;

use crate::recording::RecordingError;

pub use epochs::{epochize, prune_overlaps, EpochSet};
pub use filter::{
    bandpass, butter_bandpass, butter_lowpass, decimate, Biquad, Sos, BANDPASS_ORDER,
    DECIMATE_ORDER,
};
pub use resample::{rational_ratio, resample, Polyphase, MAX_RATIO_TERM};
pub use spectral::{bandpower_features, psd, psd_epochs, BandDefinition, BandName, Spectrum};

pub(crate) use resample::resample_rows;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("band {lo_hz}-{hi_hz} Hz is not inside (0, {nyquist_hz}) Hz")]
    BandOutOfRange {
        lo_hz: f64,
        hi_hz: f64,
        nyquist_hz: f64,
    },
    #[error("decimation factor must be at least 1, got {0}")]
    InvalidFactor(usize),
    #[error("cannot express {to_hz}/{from_hz} Hz as p/q with p, q <= {}", MAX_RATIO_TERM)]
    IrrationalRatio { from_hz: f64, to_hz: f64 },
    #[error("epoch window [{t0_s}, {t1_s}) s is empty or reversed")]
    BadWindow { t0_s: f64, t1_s: f64 },
    #[error("no events selected ({dropped} dropped at the recording edges)")]
    NoEventsSelected { dropped: usize },
    #[error("signal too short: {samples} samples, need {needed}")]
    TooShort { samples: usize, needed: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Recording(#[from] RecordingError),
}
