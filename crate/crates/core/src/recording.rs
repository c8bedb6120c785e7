//! Continuous recordings and their event markers.

use std::collections::HashSet;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The 16-electrode montage used for every session (10-20 positions).
pub const MONTAGE_16: [&str; 16] = [
    "AFz", "Fz", "FCz", "C3", "C1", "Cz", "C2", "C4", "CPz", "P3", "Pz", "P4", "POz", "O1", "Oz",
    "O2",
];

// Canonical spellings used when normalizing labels read from files.
const CANONICAL_LABELS: &[&str] = &[
    "Fp1", "Fpz", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7", "F5", "F3", "F1", "Fz", "F2",
    "F4", "F6", "F8", "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8", "T7", "C5",
    "C3", "C1", "Cz", "C2", "C4", "C6", "T8", "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4",
    "CP6", "TP8", "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8", "PO7", "PO3", "POz", "PO4",
    "PO8", "O1", "Oz", "O2", "Iz", "A1", "A2", "M1", "M2", "T3", "T4", "T5", "T6",
];

/// Maps a channel label onto its canonical 10-20 spelling, ignoring case and
/// surrounding whitespace. Unknown labels are returned trimmed but otherwise
/// untouched.
pub fn normalize_label(label: &str) -> String {
    let trimmed = label.trim_matches(|c: char| c.is_whitespace() || c == '\0');
    CANONICAL_LABELS
        .iter()
        .find(|c| c.eq_ignore_ascii_case(trimmed))
        .map(|c| (*c).to_string())
        .unwrap_or_else(|| trimmed.to_string())
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordingError {
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("{labels} channel labels for {rows} signal rows")]
    LabelCount { labels: usize, rows: usize },
    #[error("duplicate channel label {0:?}")]
    DuplicateLabel(String),
    #[error("non-finite sample in channel {channel} at index {index}")]
    NonFinite { channel: usize, index: usize },
    #[error("event onsets must be finite and non-decreasing (event {0})")]
    UnorderedEvents(usize),
    #[error("event {index} at {onset_s} s lies outside the recording (0..{duration_s} s)")]
    EventOutOfRange {
        index: usize,
        onset_s: f64,
        duration_s: f64,
    },
}

/// Uniformly sampled multichannel signal in microvolts, stored channels × time.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    sample_rate_hz: f64,
    channel_labels: Vec<String>,
    samples: Array2<f64>,
    start_time_s: f64,
}

impl Recording {
    pub fn new(
        sample_rate_hz: f64,
        channel_labels: Vec<String>,
        samples: Array2<f64>,
        start_time_s: f64,
    ) -> Result<Self, RecordingError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(RecordingError::BadRate(sample_rate_hz));
        }
        if channel_labels.len() != samples.nrows() {
            return Err(RecordingError::LabelCount {
                labels: channel_labels.len(),
                rows: samples.nrows(),
            });
        }
        let mut seen = HashSet::new();
        for label in &channel_labels {
            if !seen.insert(label.as_str()) {
                return Err(RecordingError::DuplicateLabel(label.clone()));
            }
        }
        for (channel, row) in samples.outer_iter().enumerate() {
            if let Some(index) = row.iter().position(|v| !v.is_finite()) {
                return Err(RecordingError::NonFinite { channel, index });
            }
        }
        Ok(Self {
            sample_rate_hz,
            channel_labels,
            samples,
            start_time_s,
        })
    }

    /// Same metadata, new signal matrix (and possibly a new rate). Used by
    /// the processing stages whose output is still a recording.
    pub fn with_samples(
        &self,
        sample_rate_hz: f64,
        samples: Array2<f64>,
    ) -> Result<Self, RecordingError> {
        Self::new(
            sample_rate_hz,
            self.channel_labels.clone(),
            samples,
            self.start_time_s,
        )
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channel_labels.iter().position(|l| l == label)
    }
}

/// Stimulus and condition markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventCode {
    Target,
    Distractor,
    #[serde(rename = "cond_0back")]
    Cond0Back,
    #[serde(rename = "cond_2back")]
    Cond2Back,
    BlockStart,
    BlockEnd,
}

impl EventCode {
    pub fn name(self) -> &'static str {
        match self {
            EventCode::Target => "target",
            EventCode::Distractor => "distractor",
            EventCode::Cond0Back => "cond_0back",
            EventCode::Cond2Back => "cond_2back",
            EventCode::BlockStart => "block_start",
            EventCode::BlockEnd => "block_end",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            EventCode::Target,
            EventCode::Distractor,
            EventCode::Cond0Back,
            EventCode::Cond2Back,
            EventCode::BlockStart,
            EventCode::BlockEnd,
        ]
        .into_iter()
        .find(|c| c.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for EventCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub onset_s: f64,
    pub code: EventCode,
}

/// Time-ordered event markers, onsets in seconds from the recording start.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EventList {
    events: Vec<Event>,
}

impl EventList {
    pub fn new(events: Vec<Event>) -> Result<Self, RecordingError> {
        let mut prev = f64::NEG_INFINITY;
        for (i, e) in events.iter().enumerate() {
            if !e.onset_s.is_finite() || e.onset_s < prev {
                return Err(RecordingError::UnorderedEvents(i));
            }
            prev = e.onset_s;
        }
        Ok(Self { events })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Checks that every onset falls within `[0, duration_s]`.
    pub fn check_within(&self, duration_s: f64) -> Result<(), RecordingError> {
        for (index, e) in self.events.iter().enumerate() {
            if e.onset_s < 0.0 || e.onset_s > duration_s {
                return Err(RecordingError::EventOutOfRange {
                    index,
                    onset_s: e.onset_s,
                    duration_s,
                });
            }
        }
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.events.iter()
    }

    pub fn count(&self, code: EventCode) -> usize {
        self.events.iter().filter(|e| e.code == code).count()
    }
}

impl<'de> Deserialize<'de> for EventList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let events = Vec::<Event>::deserialize(d)?;
        EventList::new(events).map_err(serde::de::Error::custom)
    }
}
