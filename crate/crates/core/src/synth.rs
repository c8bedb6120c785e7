//! Ground-truth session generator and virtual amplifiers.
//!
//! Sessions are rendered at a 2048 Hz source rate on the 16-channel montage
//! and then passed through one [`AmpConfig`] per simulated device. The
//! amplifier model is `float32(quantize(gain · polarity · delay(resample(x)) + noise))`.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with a 64-bit seed;
//! independent per-channel draws use distinct ChaCha stream ids, so results
//! are identical whether channels are rendered sequentially or in parallel.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{self, BandDefinition, BandName};
use crate::recording::{Event, EventCode, EventList, Recording, RecordingError, MONTAGE_16};

/// Internal rendering rate; 512 Hz and 125 Hz are both exact rational
/// resamplings of it.
pub const SOURCE_RATE_HZ: f64 = 2048.0;

/// Lowest frequency given its own 1/f weight; bins below share it.
const PINK_FLOOR_HZ: f64 = 0.5;
/// Fraction of background power shared by all channels.
const COMMON_NOISE_FRACTION: f64 = 0.5;
/// Tone spacing of the band oscillators. Every tone completes a whole number
/// of cycles in any window that is a multiple of 2 s.
const TONE_SPACING_HZ: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("source rate {source_hz} Hz cannot be rendered at {amp_hz} Hz")]
    RateIncompatible { source_hz: f64, amp_hz: f64 },
    #[error(transparent)]
    Recording(#[from] RecordingError),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidConfig(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OddballConfig {
    pub n_letters: usize,
    /// Target flashes per letter (row + column, so even).
    pub flashes_per_letter: usize,
    /// Flash duration; flashes follow each other back to back.
    pub flash_duration_s: f64,
    pub target_fraction: f64,
    pub erp_peak_s: f64,
    pub erp_amplitude_uv: f64,
    pub background_noise_uv: f64,
    /// Silence before the first and after the last flash.
    pub lead_s: f64,
    /// Pause between letters.
    pub letter_pause_s: f64,
    pub seed: u64,
}

impl Default for OddballConfig {
    fn default() -> Self {
        Self {
            n_letters: 32,
            flashes_per_letter: 24,
            flash_duration_s: 0.2,
            target_fraction: 1.0 / 6.0,
            erp_peak_s: 0.3,
            erp_amplitude_uv: 12.0,
            background_noise_uv: 10.0,
            lead_s: 2.0,
            letter_pause_s: 2.0,
            seed: 0,
        }
    }
}

impl OddballConfig {
    /// Flashes per letter, targets included.
    pub fn flashes_total_per_letter(&self) -> usize {
        (self.flashes_per_letter as f64 / self.target_fraction).round() as usize
    }

    /// Stimuli flashed in one repetition (one row/column pair contains the
    /// target letter).
    fn stimuli_per_repetition(&self) -> usize {
        (2.0 / self.target_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_letters == 0 {
            return Err(invalid("n_letters must be positive"));
        }
        if self.flashes_per_letter == 0 || self.flashes_per_letter % 2 != 0 {
            return Err(invalid("flashes_per_letter must be positive and even"));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction < 1.0) {
            return Err(invalid("target_fraction must lie in (0, 1)"));
        }
        let per_rep = 2.0 / self.target_fraction;
        if (per_rep - per_rep.round()).abs() > 1e-9 {
            return Err(invalid("2 / target_fraction must be a whole number of stimuli"));
        }
        for (name, v) in [
            ("flash_duration_s", self.flash_duration_s),
            ("erp_peak_s", self.erp_peak_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("erp_amplitude_uv", self.erp_amplitude_uv),
            ("background_noise_uv", self.background_noise_uv),
            ("lead_s", self.lead_s),
            ("letter_pause_s", self.letter_pause_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbackConfig {
    pub n_trials: usize,
    pub n_blocks: usize,
    pub trial_duration_s: f64,
    /// Multiplier on the alpha sources during 2-back blocks.
    pub alpha_suppression_ratio: f64,
    /// RMS amplitude of each band's sources, µV.
    pub band_source_amplitudes: BTreeMap<BandName, f64>,
    pub background_noise_uv: f64,
    pub lead_s: f64,
    pub seed: u64,
}

impl Default for NbackConfig {
    fn default() -> Self {
        let band_source_amplitudes = [
            (BandName::Delta, 4.0),
            (BandName::Theta, 3.0),
            (BandName::Alpha, 6.0),
            (BandName::Beta, 2.0),
            (BandName::Gamma, 1.0),
        ]
        .into_iter()
        .collect();
        Self {
            n_trials: 360,
            n_blocks: 6,
            trial_duration_s: 2.0,
            alpha_suppression_ratio: 0.5,
            band_source_amplitudes,
            background_noise_uv: 8.0,
            lead_s: 2.0,
            seed: 0,
        }
    }
}

impl NbackConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_blocks == 0 || self.n_trials == 0 || self.n_trials % self.n_blocks != 0 {
            return Err(invalid("n_trials must be a positive multiple of n_blocks"));
        }
        let cycles = self.trial_duration_s / (1.0 / TONE_SPACING_HZ);
        if !(self.trial_duration_s > 0.0) || (cycles - cycles.round()).abs() > 1e-9 {
            return Err(invalid("trial_duration_s must be a positive multiple of 2 s"));
        }
        if !(self.alpha_suppression_ratio > 0.0 && self.alpha_suppression_ratio <= 1.0) {
            return Err(invalid("alpha_suppression_ratio must lie in (0, 1]"));
        }
        if self
            .band_source_amplitudes
            .values()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(invalid("band amplitudes must be non-negative"));
        }
        for (name, v) in [
            ("background_noise_uv", self.background_noise_uv),
            ("lead_s", self.lead_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Signal polarity of an amplifier; serialized as `1` / `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Polarity {
    Normal,
    Inverted,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Normal => 1.0,
            Polarity::Inverted => -1.0,
        }
    }
}

impl TryFrom<i8> for Polarity {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Polarity::Normal),
            -1 => Ok(Polarity::Inverted),
            other => Err(format!("polarity must be 1 or -1, got {other}")),
        }
    }
}

impl From<Polarity> for i8 {
    fn from(p: Polarity) -> i8 {
        match p {
            Polarity::Normal => 1,
            Polarity::Inverted => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmpConfig {
    pub sample_rate_hz: f64,
    pub lag_s: f64,
    pub polarity: Polarity,
    pub gain: f64,
    pub noise_std_uv: f64,
    /// Quantization step; 0 disables quantization.
    pub quantization_uv: f64,
}

impl Default for AmpConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl AmpConfig {
    /// Medical-grade style device: 512 Hz, no lag, low noise.
    pub fn reference() -> Self {
        Self {
            sample_rate_hz: 512.0,
            lag_s: 0.0,
            polarity: Polarity::Normal,
            gain: 1.0,
            noise_std_uv: 0.5,
            quantization_uv: 0.0,
        }
    }

    /// Consumer board style device: 125 Hz, 88 ms late, inverted, noisier,
    /// 24-bit quantization at gain 24 (4.5 V / 24 / 2²³). The noise level is
    /// a tuning knob: it is set so the ERP pipeline loses a few AUROCC points
    /// against the reference device on default sessions.
    pub fn consumer() -> Self {
        Self {
            sample_rate_hz: 125.0,
            lag_s: 0.088,
            polarity: Polarity::Inverted,
            gain: 1.0,
            noise_std_uv: 12.0,
            quantization_uv: 4.5e6 / 24.0 / 8_388_608.0,
        }
    }

    /// An ideal device at `rate`: no lag, noise or quantization.
    pub fn ideal(rate: f64) -> Self {
        Self {
            sample_rate_hz: rate,
            lag_s: 0.0,
            polarity: Polarity::Normal,
            gain: 1.0,
            noise_std_uv: 0.0,
            quantization_uv: 0.0,
        }
    }

    /// Lag expressed in samples of this amplifier's rate.
    pub fn lag_samples(&self) -> f64 {
        self.lag_s * self.sample_rate_hz
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(invalid("sample_rate_hz must be positive"));
        }
        if !(self.lag_s >= 0.0 && self.lag_s < 1.0) {
            return Err(invalid("lag_s must lie in [0, 1)"));
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(invalid("gain must be positive"));
        }
        if !(self.noise_std_uv.is_finite() && self.noise_std_uv >= 0.0) {
            return Err(invalid("noise_std_uv must be non-negative"));
        }
        if !(self.quantization_uv.is_finite() && self.quantization_uv >= 0.0) {
            return Err(invalid("quantization_uv must be non-negative"));
        }
        Ok(())
    }
}

fn montage_labels() -> Vec<String> {
    MONTAGE_16.iter().map(|s| s.to_string()).collect()
}

fn seconds_to_samples(t: f64) -> usize {
    (t * SOURCE_RATE_HZ).round() as usize
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent 64-bit seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Relative P300 amplitude per electrode: parieto-central maximum at Pz,
/// falling to 0.2 frontally. Unknown labels get 0.
pub fn erp_weight(label: &str) -> f64 {
    match label {
        "AFz" => 0.2,
        "Fz" => 0.3,
        "FCz" => 0.45,
        "C3" | "C4" => 0.5,
        "C1" | "C2" => 0.6,
        "Cz" => 0.65,
        "CPz" => 0.85,
        "P3" | "P4" => 0.85,
        "Pz" => 1.0,
        "POz" => 0.95,
        "O1" | "O2" => 0.7,
        "Oz" => 0.75,
        _ => 0.0,
    }
}

/// Gaussian bump of half-width at half-maximum 0.1 s; returns the unit-peak
/// template value at time `t_s` after stimulus onset.
pub fn erp_template(peak_s: f64, t_s: f64) -> f64 {
    const HWHM_S: f64 = 0.1;
    let sigma = HWHM_S / (2.0 * 2f64.ln()).sqrt();
    let d = t_s - peak_s;
    (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Flash schedule: per letter, `flashes_per_letter / 2` repetitions of a
/// random permutation of the row/column stimuli, two of which contain the
/// target letter. Onsets are snapped to the source sample grid.
pub fn oddball_schedule(cfg: &OddballConfig) -> Result<EventList, SynthError> {
    cfg.validate()?;
    let mut rng = rng_stream(cfg.seed, 0);
    let per_rep = cfg.stimuli_per_repetition();
    let reps = cfg.flashes_per_letter / 2;
    let mut stimuli: Vec<usize> = (0..per_rep).collect();
    let mut events = Vec::with_capacity(cfg.n_letters * reps * per_rep);
    let mut t = cfg.lead_s;
    for letter in 0..cfg.n_letters {
        if letter > 0 {
            t += cfg.letter_pause_s;
        }
        // The stimuli containing the target: one row, one column.
        let row = rng.random_range(0..per_rep / 2);
        let col = per_rep / 2 + rng.random_range(0..per_rep / 2);
        for _ in 0..reps {
            stimuli.shuffle(&mut rng);
            for &s in &stimuli {
                let code = if s == row || s == col {
                    EventCode::Target
                } else {
                    EventCode::Distractor
                };
                let onset_s = seconds_to_samples(t) as f64 / SOURCE_RATE_HZ;
                events.push(Event { onset_s, code });
                t += cfg.flash_duration_s;
            }
        }
    }
    Ok(EventList::new(events)?)
}

/// Two independent white Gaussian sequences shaped to a 1/f power spectrum
/// (−10 dB/decade in amplitude), each normalized to unit RMS.
///
/// The sequences travel as the real and imaginary parts of one complex FFT;
/// the shaping gain is real and even in frequency, so the two never mix.
fn pink_noise_pair(n: usize, rng: &mut ChaCha8Rng) -> [Vec<f64>; 2] {
    if n == 0 {
        return [Vec::new(), Vec::new()];
    }
    let len = n.next_power_of_two();
    let mut buf: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let df = SOURCE_RATE_HZ / len as f64;
    for (k, v) in buf.iter_mut().enumerate() {
        let bin = k.min(len - k);
        if bin == 0 {
            *v = Complex64::new(0.0, 0.0);
        } else {
            let f = (bin as f64 * df).max(PINK_FLOOR_HZ);
            *v /= f.sqrt();
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let unit_rms = |mut x: Vec<f64>| {
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        if rms > 0.0 {
            x.iter_mut().for_each(|v| *v /= rms);
        }
        x
    };
    [
        unit_rms(buf[..n].iter().map(|c| c.re).collect()),
        unit_rms(buf[..n].iter().map(|c| c.im).collect()),
    ]
}

/// Spatially correlated 1/f background: each channel mixes its own pink noise
/// with a component shared by all channels.
fn background(n_channels: usize, n: usize, rms_uv: f64, seed: u64) -> Array2<f64> {
    let mut out = Array2::zeros((n_channels, n));
    if rms_uv == 0.0 {
        return out;
    }
    let pairs = (n_channels + 2) / 2;
    let rows: Vec<Vec<f64>> = (0..pairs as u64)
        .into_par_iter()
        .flat_map_iter(|stream| pink_noise_pair(n, &mut rng_stream(seed, 1 + stream)))
        .collect();
    let (common, own) = rows.split_first().expect("at least the common row");
    let a = (1.0 - COMMON_NOISE_FRACTION).sqrt() * rms_uv;
    let b = COMMON_NOISE_FRACTION.sqrt() * rms_uv;
    for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(own) {
        for ((d, s), c) in dst.iter_mut().zip(src).zip(common) {
            *d = a * s + b * c;
        }
    }
    out
}

/// Adds the P300 template for every Target event into `samples`.
pub fn render_erps(samples: &mut Array2<f64>, labels: &[String], events: &EventList, cfg: &OddballConfig) {
    let span = cfg.erp_peak_s + 0.5;
    let weights: Vec<f64> = labels.iter().map(|l| erp_weight(l) * cfg.erp_amplitude_uv).collect();
    let n = samples.ncols();
    for e in events.iter().filter(|e| e.code == EventCode::Target) {
        let start = (e.onset_s * SOURCE_RATE_HZ).ceil() as usize;
        let stop = (((e.onset_s + span) * SOURCE_RATE_HZ).ceil() as usize).min(n);
        for i in start..stop {
            let v = erp_template(cfg.erp_peak_s, i as f64 / SOURCE_RATE_HZ - e.onset_s);
            for (c, w) in weights.iter().enumerate() {
                samples[[c, i]] += w * v;
            }
        }
    }
}

/// Renders a P300 oddball session at [`SOURCE_RATE_HZ`] on the 16-channel
/// montage.
pub fn generate_oddball_session(cfg: &OddballConfig) -> Result<(Recording, EventList), SynthError> {
    let events = oddball_schedule(cfg)?;
    let last = events.events().last().map_or(0.0, |e| e.onset_s);
    let n = seconds_to_samples(last + cfg.flash_duration_s + cfg.lead_s.max(1.5));
    let labels = montage_labels();
    let mut samples = background(labels.len(), n, cfg.background_noise_uv, cfg.seed);
    render_erps(&mut samples, &labels, &events, cfg);
    let rec = Recording::new(SOURCE_RATE_HZ, labels, samples, 0.0)?;
    Ok((rec, events))
}

/// Spatial patterns of the oscillatory sources: two per band.
fn band_patterns(band: BandName) -> [fn(&str) -> f64; 2] {
    fn posterior(l: &str) -> f64 {
        match l {
            "O1" | "Oz" | "O2" => 1.0,
            "POz" => 0.9,
            "P3" | "Pz" | "P4" => 0.7,
            "CPz" => 0.45,
            "C3" | "C1" | "Cz" | "C2" | "C4" => 0.25,
            _ => 0.1,
        }
    }
    fn posterior_left(l: &str) -> f64 {
        match l {
            "O1" | "P3" => 1.0,
            "Oz" | "POz" => 0.6,
            "Pz" | "C3" => 0.5,
            "O2" | "P4" | "C1" => 0.3,
            _ => 0.1,
        }
    }
    fn frontal(l: &str) -> f64 {
        match l {
            "Fz" | "FCz" => 1.0,
            "AFz" => 0.8,
            "Cz" => 0.6,
            "C1" | "C2" => 0.45,
            "CPz" => 0.35,
            _ => 0.15,
        }
    }
    fn central(l: &str) -> f64 {
        match l {
            "C3" | "C4" => 1.0,
            "C1" | "C2" => 0.8,
            "Cz" | "CPz" => 0.6,
            "FCz" | "P3" | "P4" => 0.4,
            _ => 0.15,
        }
    }
    fn diffuse(l: &str) -> f64 {
        match l {
            "AFz" | "Fz" | "O1" | "O2" => 0.8,
            _ => 0.5,
        }
    }
    fn lateral(l: &str) -> f64 {
        match l {
            "C4" | "P4" | "O2" => 1.0,
            "C2" => 0.6,
            "C3" | "P3" | "O1" => 0.2,
            _ => 0.35,
        }
    }
    match band {
        BandName::Delta => [frontal, diffuse],
        BandName::Theta => [frontal, central],
        BandName::Alpha => [posterior, posterior_left],
        BandName::Beta => [central, lateral],
        BandName::Gamma => [diffuse, lateral],
    }
}

/// Sum of equal-amplitude tones on the 0.5 Hz grid inside `band`, random
/// phases, unit RMS.
fn band_oscillator(band: &BandDefinition, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lo = (band.lo_hz / TONE_SPACING_HZ).ceil() as usize;
    let hi = (band.hi_hz / TONE_SPACING_HZ).floor() as usize;
    let tones: Vec<(f64, f64)> = (lo..=hi)
        .map(|k| (k as f64 * TONE_SPACING_HZ, rng.random_range(0.0..2.0 * PI)))
        .collect();
    let amp = (2.0 / tones.len() as f64).sqrt();
    (0..n)
        .map(|i| {
            let t = i as f64 / SOURCE_RATE_HZ;
            tones
                .iter()
                .map(|(f, ph)| amp * (2.0 * PI * f * t + ph).sin())
                .sum()
        })
        .collect()
}

/// Condition of the n-back block `b` (blocks alternate, starting with 0-back).
pub fn block_condition(b: usize) -> EventCode {
    if b % 2 == 0 {
        EventCode::Cond0Back
    } else {
        EventCode::Cond2Back
    }
}

/// Renders an n-back workload session: band-limited oscillatory sources plus
/// 1/f background, alpha sources scaled by `alpha_suppression_ratio` during
/// 2-back blocks. Events mark block boundaries and every trial onset.
pub fn generate_nback_session(cfg: &NbackConfig) -> Result<(Recording, EventList), SynthError> {
    cfg.validate()?;
    let labels = montage_labels();
    let per_block = cfg.n_trials / cfg.n_blocks;
    let trial_len = seconds_to_samples(cfg.trial_duration_s);
    let lead = seconds_to_samples(cfg.lead_s);
    let block_len = per_block * trial_len;
    let n = 2 * lead + cfg.n_blocks * block_len;

    let mut events = Vec::with_capacity(cfg.n_trials + 2 * cfg.n_blocks);
    for b in 0..cfg.n_blocks {
        let block_start = lead + b * block_len;
        let t = |i: usize| i as f64 / SOURCE_RATE_HZ;
        events.push(Event {
            onset_s: t(block_start),
            code: EventCode::BlockStart,
        });
        for j in 0..per_block {
            events.push(Event {
                onset_s: t(block_start + j * trial_len),
                code: block_condition(b),
            });
        }
        events.push(Event {
            onset_s: t(block_start + block_len),
            code: EventCode::BlockEnd,
        });
    }
    let events = EventList::new(events)?;

    // Per-sample alpha multiplier.
    let alpha_gain: Vec<f64> = (0..n)
        .map(|i| {
            let in_2back = i >= lead
                && i < lead + cfg.n_blocks * block_len
                && block_condition((i - lead) / block_len) == EventCode::Cond2Back;
            if in_2back {
                cfg.alpha_suppression_ratio
            } else {
                1.0
            }
        })
        .collect();

    let mut samples = background(labels.len(), n, cfg.background_noise_uv, cfg.seed);
    let bands: Vec<(BandDefinition, f64)> = cfg
        .band_source_amplitudes
        .iter()
        .filter(|(_, a)| **a > 0.0)
        .map(|(name, a)| (BandDefinition::canonical(*name), *a))
        .collect();
    let mut stream = 1000u64;
    for (band, amp) in bands {
        for pattern in band_patterns(band.name) {
            let mut rng = rng_stream(cfg.seed, stream);
            stream += 1;
            let mut source = band_oscillator(&band, n, &mut rng);
            if band.name == BandName::Alpha {
                source.iter_mut().zip(&alpha_gain).for_each(|(s, g)| *s *= g);
            }
            for (mut row, label) in samples.axis_iter_mut(Axis(0)).zip(&labels) {
                let w = amp * pattern(label);
                row.iter_mut().zip(&source).for_each(|(d, s)| *d += w * s);
            }
        }
    }
    let rec = Recording::new(SOURCE_RATE_HZ, labels, samples, 0.0)?;
    Ok((rec, events))
}

/// Shifts each row later by `lag` samples (fractional lags interpolate
/// linearly); the first samples hold the initial value.
fn delay_rows(samples: &Array2<f64>, lag: f64) -> Array2<f64> {
    if lag == 0.0 {
        return samples.clone();
    }
    let n = samples.ncols();
    let whole = lag.floor();
    let frac = lag - whole;
    let whole = whole as usize;
    let mut out = Array2::zeros(samples.raw_dim());
    for (src, mut dst) in samples.outer_iter().zip(out.outer_iter_mut()) {
        let at = |i: isize| src[i.clamp(0, n as isize - 1) as usize];
        for (i, d) in dst.iter_mut().enumerate() {
            let j = i as isize - whole as isize;
            *d = if frac == 0.0 {
                at(j)
            } else {
                (1.0 - frac) * at(j) + frac * at(j - 1)
            };
        }
    }
    out
}

/// Renders `source` through a simulated amplifier.
///
/// Output = float32(quantize(gain · polarity · delay(resample(source)) + noise)).
/// The delay is applied at the amplifier's own rate, so a lag that is a whole
/// number of output samples is an exact shift.
pub fn virtual_amplifier(source: &Recording, amp: &AmpConfig, seed: u64) -> Result<Recording, SynthError> {
    amp.validate()?;
    let src_rate = source.sample_rate_hz();
    let incompatible = SynthError::RateIncompatible {
        source_hz: src_rate,
        amp_hz: amp.sample_rate_hz,
    };
    if amp.sample_rate_hz > src_rate {
        return Err(incompatible);
    }
    let (p, q) = dsp::rational_ratio(src_rate, amp.sample_rate_hz).ok_or(incompatible)?;
    let resampled = if p == q {
        source.samples().clone()
    } else {
        dsp::resample_rows(source.samples(), p as usize, q as usize)
    };

    let mut lag = amp.lag_samples();
    if (lag - lag.round()).abs() < 1e-9 {
        lag = lag.round();
    }
    let mut out = delay_rows(&resampled, lag);

    let scale = amp.gain * amp.polarity.sign();
    if scale != 1.0 {
        out.mapv_inplace(|v| v * scale);
    }
    if amp.noise_std_uv > 0.0 {
        for (c, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let mut rng = rng_stream(seed, c as u64);
            for v in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += amp.noise_std_uv * z;
            }
        }
    }
    if amp.quantization_uv > 0.0 {
        out.mapv_inplace(|v| (v / amp.quantization_uv).round() * amp.quantization_uv);
    }
    out.mapv_inplace(|v| v as f32 as f64);
    Ok(source.with_samples(amp.sample_rate_hz, out)?)
}

/// Seed of the noise generator of amplifier `index` (0 = A, 1 = B) for a
/// session seed.
pub fn amp_seed(session_seed: u64, index: u64) -> u64 {
    derive_seed(session_seed, 0xA000 + index)
}

/// Renders one source through two amplifiers with noise seeds derived from
/// `session_seed`.
pub fn render_pair(
    source: &Recording,
    amp_a: &AmpConfig,
    amp_b: &AmpConfig,
    session_seed: u64,
) -> Result<(Recording, Recording), SynthError> {
    Ok((
        virtual_amplifier(source, amp_a, amp_seed(session_seed, 0))?,
        virtual_amplifier(source, amp_b, amp_seed(session_seed, 1))?,
    ))
}
