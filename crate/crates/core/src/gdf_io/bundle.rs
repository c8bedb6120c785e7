use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::recording::{Event, EventList, Recording};

pub const META_FILE: &str = "meta.json";
pub const SIGNALS_FILE: &str = "signals.f32le";
pub const BUNDLE_FORMAT: &str = "ampcmp-bundle";
pub const BUNDLE_VERSION: &str = "1";

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleMeta {
    pub format: String,
    pub version: String,
    pub byte_order: String,
    pub sample_type: String,
    pub sample_rate_hz: f64,
    pub start_time_s: f64,
    pub channel_labels: Vec<String>,
    pub n_samples: usize,
    pub events: Vec<Event>,
}

/// Writes `meta.json` and `signals.f32le` (channel-major little-endian f32)
/// into `dir`, creating it if needed. Samples are stored as f32, so the
/// round trip is exact for matrices whose values are f32-representable.
pub fn write_bundle(dir: &Path, rec: &Recording, events: &EventList) -> Result<(), IoError> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::with_capacity(rec.n_channels() * rec.n_samples() * 4);
    for (channel, row) in rec.samples().outer_iter().enumerate() {
        for (index, &v) in row.iter().enumerate() {
            let f = v as f32;
            if !f.is_finite() {
                return Err(IoError::NonFinite { channel, index });
            }
            bytes.extend_from_slice(&f.to_le_bytes());
        }
    }
    let meta = BundleMeta {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION.into(),
        byte_order: "little".into(),
        sample_type: "f32".into(),
        sample_rate_hz: rec.sample_rate_hz(),
        start_time_s: rec.start_time_s(),
        channel_labels: rec.channel_labels().to_vec(),
        n_samples: rec.n_samples(),
        events: events.events().to_vec(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| IoError::SchemaMismatch(e.to_string()))?;
    fs::write(dir.join(META_FILE), json + "\n")?;
    fs::write(dir.join(SIGNALS_FILE), bytes)?;
    Ok(())
}

pub fn read_bundle(dir: &Path) -> Result<(Recording, EventList), IoError> {
    let text = fs::read_to_string(dir.join(META_FILE))?;
    let meta: BundleMeta = serde_json::from_str(&text).map_err(|e| IoError::SchemaMismatch(e.to_string()))?;
    for (field, got, want) in [
        ("format", &meta.format, BUNDLE_FORMAT),
        ("version", &meta.version, BUNDLE_VERSION),
        ("byte_order", &meta.byte_order, "little"),
        ("sample_type", &meta.sample_type, "f32"),
    ] {
        if got != want {
            return Err(IoError::SchemaMismatch(format!("{field} is {got:?}, expected {want:?}")));
        }
    }

    let bytes = fs::read(dir.join(SIGNALS_FILE))?;
    let n_ch = meta.channel_labels.len();
    let expected = (n_ch as u64)
        .checked_mul(meta.n_samples as u64)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| IoError::SchemaMismatch("signal size overflows".into()))?;
    if bytes.len() as u64 != expected {
        return Err(IoError::SizeMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let samples = Array2::from_shape_vec((n_ch, meta.n_samples), values).expect("size checked above");
    let rec = Recording::new(meta.sample_rate_hz, meta.channel_labels, samples, meta.start_time_s)?;
    let events = EventList::new(meta.events)?;
    events.check_within(rec.duration_s())?;
    Ok((rec, events))
}
