//! GDF 2.x subset: fixed header, per-channel headers, int16 / int24 /
//! float32 samples and event table modes 1 and 3.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::IoError;
use crate::recording::{normalize_label, Event, EventCode, EventList, Recording};

const BLOCK: usize = 256;

// Physical dimension codes: volt, with the SI prefix in the low 5 bits.
const DIM_VOLT: u16 = 4256;
const PREFIX_MILLI: u16 = 18;
const PREFIX_MICRO: u16 = 19;
const PREFIX_NANO: u16 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdfSampleType {
    Int16,
    Int24,
    Float32,
}

impl GdfSampleType {
    pub fn code(self) -> u32 {
        match self {
            GdfSampleType::Int16 => 3,
            GdfSampleType::Float32 => 16,
            GdfSampleType::Int24 => 279,
        }
    }

    fn from_code(code: u32) -> Result<Self, IoError> {
        match code {
            3 => Ok(GdfSampleType::Int16),
            16 => Ok(GdfSampleType::Float32),
            279 => Ok(GdfSampleType::Int24),
            other => Err(IoError::UnsupportedType(other)),
        }
    }

    fn width(self) -> usize {
        match self {
            GdfSampleType::Int16 => 2,
            GdfSampleType::Int24 => 3,
            GdfSampleType::Float32 => 4,
        }
    }

    /// Digital range used by the writer.
    fn digital_range(self) -> (f64, f64) {
        match self {
            GdfSampleType::Int16 => (-32768.0, 32767.0),
            GdfSampleType::Int24 => (-8_388_608.0, 8_388_607.0),
            GdfSampleType::Float32 => (-1.0, 1.0),
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            GdfSampleType::Int16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            GdfSampleType::Int24 => (i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8) as f64,
            GdfSampleType::Float32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdfFile {
    pub recording: Recording,
    pub events: EventList,
    /// Events whose type had no entry in the code map.
    pub unmapped_events: usize,
    pub version: String,
}

struct Channel {
    label: String,
    scale_to_uv: f64,
    phys_min: f64,
    phys_max: f64,
    dig_min: f64,
    dig_max: f64,
    spr: usize,
    kind: GdfSampleType,
}

fn truncated(needed: usize, available: usize) -> IoError {
    IoError::TruncatedData {
        needed: needed as u64,
        available: available as u64,
    }
}

fn inconsistent(msg: impl Into<String>) -> IoError {
    IoError::HeaderInconsistent(msg.into())
}

fn take(bytes: &[u8], at: usize, len: usize) -> Result<&[u8], IoError> {
    let end = at.checked_add(len).ok_or_else(|| inconsistent("offset overflow"))?;
    bytes.get(at..end).ok_or_else(|| truncated(end, bytes.len()))
}

fn u16_at(b: &[u8], at: usize) -> Result<u16, IoError> {
    Ok(u16::from_le_bytes(take(b, at, 2)?.try_into().expect("2 bytes")))
}

fn u32_at(b: &[u8], at: usize) -> Result<u32, IoError> {
    Ok(u32::from_le_bytes(take(b, at, 4)?.try_into().expect("4 bytes")))
}

fn i64_at(b: &[u8], at: usize) -> Result<i64, IoError> {
    Ok(i64::from_le_bytes(take(b, at, 8)?.try_into().expect("8 bytes")))
}

fn f64_at(b: &[u8], at: usize) -> Result<f64, IoError> {
    Ok(f64::from_le_bytes(take(b, at, 8)?.try_into().expect("8 bytes")))
}

fn f32_at(b: &[u8], at: usize) -> Result<f32, IoError> {
    Ok(f32::from_le_bytes(take(b, at, 4)?.try_into().expect("4 bytes")))
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b)
        .trim_matches(|c: char| c == '\0' || c.is_whitespace())
        .to_string()
}

/// Factor from the channel's physical unit to microvolts. Unknown units are
/// taken as microvolts.
fn unit_scale(code: u16, name: &str) -> f64 {
    if code & !31 == DIM_VOLT {
        return match code & 31 {
            0 => 1e6,
            PREFIX_MILLI => 1e3,
            PREFIX_MICRO => 1.0,
            PREFIX_NANO => 1e-3,
            _ => 1.0,
        };
    }
    match name {
        "V" => 1e6,
        "mV" => 1e3,
        "nV" => 1e-3,
        _ => 1.0,
    }
}

/// Parses a GDF 2.x image. `code_map` translates the file's event types;
/// events with unmapped types are dropped and counted.
pub fn parse_gdf(bytes: &[u8], code_map: &BTreeMap<u16, EventCode>) -> Result<GdfFile, IoError> {
    let magic = take(bytes, 0, 8)?;
    if &magic[..4] != b"GDF " {
        return Err(IoError::BadMagic);
    }
    let version = text(&magic[4..]);
    if !version.starts_with("2.") {
        return Err(IoError::UnsupportedVersion(version));
    }
    let header_len = u16_at(bytes, 184)? as usize * BLOCK;
    let n_records = i64_at(bytes, 236)?;
    let dur_num = u32_at(bytes, 244)?;
    let dur_den = u32_at(bytes, 248)?;
    let ns = u16_at(bytes, 252)? as usize;
    if ns == 0 {
        return Err(inconsistent("no channels"));
    }
    if header_len < BLOCK * (ns + 1) {
        return Err(inconsistent(format!("header of {header_len} bytes for {ns} channels")));
    }
    if n_records < 0 {
        return Err(inconsistent("unknown number of records"));
    }
    if dur_num == 0 || dur_den == 0 {
        return Err(inconsistent("zero record duration"));
    }
    take(bytes, 0, header_len)?;

    let var = BLOCK;
    let mut channels = Vec::with_capacity(ns);
    for c in 0..ns {
        let kind = GdfSampleType::from_code(u32_at(bytes, var + 220 * ns + 4 * c)?)?;
        let ch = Channel {
            label: normalize_label(&text(take(bytes, var + 16 * c, 16)?)),
            scale_to_uv: unit_scale(
                u16_at(bytes, var + 102 * ns + 2 * c)?,
                &text(take(bytes, var + 96 * ns + 6 * c, 6)?),
            ),
            phys_min: f64_at(bytes, var + 104 * ns + 8 * c)?,
            phys_max: f64_at(bytes, var + 112 * ns + 8 * c)?,
            dig_min: f64_at(bytes, var + 120 * ns + 8 * c)?,
            dig_max: f64_at(bytes, var + 128 * ns + 8 * c)?,
            spr: u32_at(bytes, var + 216 * ns + 4 * c)? as usize,
            kind,
        };
        let finite = [ch.phys_min, ch.phys_max, ch.dig_min, ch.dig_max].iter().all(|v| v.is_finite());
        if !finite || ch.dig_max == ch.dig_min {
            return Err(inconsistent(format!("channel {c} has a degenerate scaling")));
        }
        channels.push(ch);
    }
    let spr = channels[0].spr;
    if spr == 0 || channels.iter().any(|c| c.spr != spr) {
        return Err(inconsistent("channels must share a non-zero samples-per-record"));
    }
    let rate = spr as f64 * dur_den as f64 / dur_num as f64;

    let record_bytes: usize = channels.iter().map(|c| c.spr * c.kind.width()).sum();
    let n_records = usize::try_from(n_records).map_err(|_| inconsistent("record count"))?;
    let data_len = n_records
        .checked_mul(record_bytes)
        .ok_or_else(|| inconsistent("data size overflows"))?;
    let data = take(bytes, header_len, data_len)?;
    let n_samples = n_records * spr;

    let mut samples = Array2::zeros((ns, n_samples));
    for r in 0..n_records {
        let mut at = r * record_bytes;
        for (c, ch) in channels.iter().enumerate() {
            let gain = (ch.phys_max - ch.phys_min) / (ch.dig_max - ch.dig_min);
            let w = ch.kind.width();
            for k in 0..spr {
                let d = ch.kind.decode(&data[at..at + w]);
                let v = (ch.phys_min + (d - ch.dig_min) * gain) * ch.scale_to_uv;
                let index = r * spr + k;
                if !v.is_finite() {
                    return Err(IoError::NonFinite { channel: c, index });
                }
                samples[[c, index]] = v;
                at += w;
            }
        }
    }
    let labels = channels.into_iter().map(|c| c.label).collect();
    let recording = Recording::new(rate, labels, samples, 0.0)
        .map_err(|e| inconsistent(e.to_string()))?;

    let (events, unmapped_events) = parse_events(&bytes[header_len + data_len..], rate, code_map)?;
    events
        .check_within(recording.duration_s())
        .map_err(|e| inconsistent(e.to_string()))?;
    if unmapped_events > 0 {
        log::warn!("dropped {unmapped_events} GDF events with unmapped types");
    }
    Ok(GdfFile {
        recording,
        events,
        unmapped_events,
        version,
    })
}

fn parse_events(
    table: &[u8],
    sample_rate: f64,
    code_map: &BTreeMap<u16, EventCode>,
) -> Result<(EventList, usize), IoError> {
    if table.is_empty() {
        return Ok((EventList::empty(), 0));
    }
    let head = take(table, 0, 8)?;
    let mode = head[0];
    if mode != 1 && mode != 3 {
        return Err(inconsistent(format!("event table mode {mode}")));
    }
    let n = u32::from_le_bytes([head[1], head[2], head[3], 0]) as usize;
    let mut rate = f32_at(table, 4)? as f64;
    if rate == 0.0 {
        rate = sample_rate;
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(inconsistent(format!("event rate {rate}")));
    }
    let per_event = if mode == 1 { 6 } else { 12 };
    take(table, 8, n * per_event)?;

    let mut events = Vec::with_capacity(n);
    let mut unmapped = 0;
    for i in 0..n {
        let pos = u32_at(table, 8 + 4 * i)?;
        let typ = u16_at(table, 8 + 4 * n + 2 * i)?;
        let Some(&code) = code_map.get(&typ) else {
            unmapped += 1;
            continue;
        };
        // Positions count samples from 1.
        let onset_s = pos.saturating_sub(1) as f64 / rate;
        events.push(Event { onset_s, code });
    }
    events.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
    Ok((EventList::new(events).map_err(|e| inconsistent(e.to_string()))?, unmapped))
}

pub fn read_gdf(path: &Path, code_map: &BTreeMap<u16, EventCode>) -> Result<GdfFile, IoError> {
    parse_gdf(&fs::read(path)?, code_map)
}

fn put_text(buf: &mut [u8], s: &str) {
    let b = s.as_bytes();
    let n = b.len().min(buf.len());
    buf[..n].copy_from_slice(&b[..n]);
}

/// Writes `rec` as a single-file GDF 2.20 with a mode-1 event table. Integer
/// types scale each channel over its own range; the sample rate must be a
/// whole number of Hz. Events whose code is missing from `codes` are skipped.
pub fn write_gdf(
    path: &Path,
    rec: &Recording,
    events: &EventList,
    codes: &BTreeMap<EventCode, u16>,
    kind: GdfSampleType,
) -> Result<(), IoError> {
    let rate = rec.sample_rate_hz();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(inconsistent(format!("writer needs an integral rate, got {rate}")));
    }
    let ns = rec.n_channels();
    let n = rec.n_samples();
    if ns == 0 || ns > u16::MAX as usize - 1 {
        return Err(inconsistent(format!("{ns} channels")));
    }
    // Largest record length up to 4096 samples that divides the signal.
    let spr = (1..=n.clamp(1, 4096)).rev().find(|d| n % d == 0).unwrap_or(1);
    let n_records = n / spr;

    let header_len = BLOCK * (ns + 1);
    let mut out = vec![0u8; header_len];
    put_text(&mut out[0..8], "GDF 2.20");
    out[184..186].copy_from_slice(&((ns + 1) as u16).to_le_bytes());
    out[236..244].copy_from_slice(&(n_records as i64).to_le_bytes());
    out[244..248].copy_from_slice(&(spr as u32).to_le_bytes());
    out[248..252].copy_from_slice(&(rate as u32).to_le_bytes());
    out[252..254].copy_from_slice(&(ns as u16).to_le_bytes());

    let (dmin, dmax) = kind.digital_range();
    let mut scaling = Vec::with_capacity(ns);
    for (c, row) in rec.samples().outer_iter().enumerate() {
        let (mut lo, mut hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        if !(lo < hi) {
            let v = if lo.is_finite() { lo } else { 0.0 };
            (lo, hi) = (v - 1.0, v + 1.0);
        }
        let (pmin, pmax) = if kind == GdfSampleType::Float32 { (dmin, dmax) } else { (lo, hi) };
        scaling.push((pmin, pmax));
        let v = BLOCK;
        put_text(&mut out[v + 16 * c..v + 16 * c + 16], &rec.channel_labels()[c]);
        put_text(&mut out[v + 96 * ns + 6 * c..v + 96 * ns + 6 * c + 6], "uV");
        out[v + 102 * ns + 2 * c..][..2].copy_from_slice(&(DIM_VOLT + PREFIX_MICRO).to_le_bytes());
        out[v + 104 * ns + 8 * c..][..8].copy_from_slice(&pmin.to_le_bytes());
        out[v + 112 * ns + 8 * c..][..8].copy_from_slice(&pmax.to_le_bytes());
        out[v + 120 * ns + 8 * c..][..8].copy_from_slice(&dmin.to_le_bytes());
        out[v + 128 * ns + 8 * c..][..8].copy_from_slice(&dmax.to_le_bytes());
        out[v + 216 * ns + 4 * c..][..4].copy_from_slice(&(spr as u32).to_le_bytes());
        out[v + 220 * ns + 4 * c..][..4].copy_from_slice(&kind.code().to_le_bytes());
    }

    let samples = rec.samples();
    out.reserve(n * ns * kind.width());
    for r in 0..n_records {
        for (c, &(pmin, pmax)) in scaling.iter().enumerate() {
            let step = (pmax - pmin) / (dmax - dmin);
            for k in 0..spr {
                let v = samples[[c, r * spr + k]];
                match kind {
                    GdfSampleType::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                    GdfSampleType::Int16 => {
                        let d = (dmin + (v - pmin) / step).round().clamp(dmin, dmax) as i16;
                        out.extend_from_slice(&d.to_le_bytes());
                    }
                    GdfSampleType::Int24 => {
                        let d = (dmin + (v - pmin) / step).round().clamp(dmin, dmax) as i32;
                        out.extend_from_slice(&d.to_le_bytes()[..3]);
                    }
                }
            }
        }
    }

    let mapped: Vec<(u32, u16)> = events
        .iter()
        .filter_map(|e| codes.get(&e.code).map(|&t| ((e.onset_s * rate).round() as u32 + 1, t)))
        .collect();
    if mapped.len() >= 1 << 24 {
        return Err(inconsistent("too many events"));
    }
    out.push(1);
    out.extend_from_slice(&(mapped.len() as u32).to_le_bytes()[..3]);
    out.extend_from_slice(&(rate as f32).to_le_bytes());
    for &(pos, _) in &mapped {
        out.extend_from_slice(&pos.to_le_bytes());
    }
    for &(_, typ) in &mapped {
        out.extend_from_slice(&typ.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}
