//! Polyphase rational resampling.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::DspError;
use crate::recording::Recording;

/// Largest numerator or denominator accepted for the rate ratio.
pub const MAX_RATIO_TERM: u64 = 2048;

const KAISER_BETA: f64 = 5.0;
const HALF_LEN_FACTOR: usize = 10;

/// Expresses `new / old` as a reduced fraction `p / q` with both terms at
/// most [`MAX_RATIO_TERM`].
pub fn rational_ratio(old_rate: f64, new_rate: f64) -> Option<(u64, u64)> {
    if !(old_rate > 0.0 && new_rate > 0.0 && old_rate.is_finite() && new_rate.is_finite()) {
        return None;
    }
    let ratio = new_rate / old_rate;
    (1..=MAX_RATIO_TERM).find_map(|q| {
        let p = (ratio * q as f64).round();
        if p < 1.0 || p > MAX_RATIO_TERM as f64 {
            return None;
        }
        ((p / q as f64 - ratio).abs() <= 1e-9 * ratio).then_some((p as u64, q))
    })
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc low-pass with cutoff `cutoff` (fraction of Nyquist),
/// normalized to unit DC gain.
pub(crate) fn kaiser_lowpass(num_taps: usize, cutoff: f64, beta: f64) -> Vec<f64> {
    let m = (num_taps - 1) as f64 / 2.0;
    let denom = bessel_i0(beta);
    let mut h: Vec<f64> = (0..num_taps)
        .map(|n| {
            let t = n as f64 - m;
            let x = cutoff * t;
            let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
            let r = if m == 0.0 { 0.0 } else { t / m };
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom;
            cutoff * sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Resampler for a fixed `p / q` ratio.
#[derive(Debug, Clone)]
pub struct Polyphase {
    up: usize,
    down: usize,
    taps: Vec<f64>,
    half_len: usize,
}

impl Polyphase {
    pub fn new(up: usize, down: usize) -> Self {
        let max_pq = up.max(down);
        let half_len = HALF_LEN_FACTOR * max_pq;
        let mut taps = kaiser_lowpass(2 * half_len + 1, 1.0 / max_pq as f64, KAISER_BETA);
        taps.iter_mut().for_each(|v| *v *= up as f64);
        Self {
            up,
            down,
            taps,
            half_len,
        }
    }

    pub fn output_len(&self, n: usize) -> usize {
        (n * self.up).div_ceil(self.down)
    }

    /// Upsample by `p` (zero stuffing), low-pass, keep every `q`-th sample;
    /// the filter delay is compensated so output sample `k` sits at input
    /// time `k · q / p`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let p = self.up as isize;
        let span = 2 * self.half_len as isize;
        (0..self.output_len(n))
            .map(|k| {
                let i = (k * self.down + self.half_len) as isize;
                let m_lo = (i - span + p - 1).div_euclid(p).max(0);
                let m_hi = (i.div_euclid(p)).min(n as isize - 1);
                let mut acc = 0.0;
                let mut m = m_lo;
                while m <= m_hi {
                    acc += self.taps[(i - m * p) as usize] * x[m as usize];
                    m += 1;
                }
                acc
            })
            .collect()
    }
}

pub(crate) fn resample_rows(samples: &Array2<f64>, up: usize, down: usize) -> Array2<f64> {
    let engine = Polyphase::new(up, down);
    let rows: Vec<Vec<f64>> = samples
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|row| engine.apply(&row.to_vec()))
        .collect();
    let n_out = engine.output_len(samples.ncols());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((samples.nrows(), n_out), flat).expect("row lengths agree")
}

/// Rational resampling to `new_rate_hz`; output length is `ceil(n · p / q)`.
pub fn resample(rec: &Recording, new_rate_hz: f64) -> Result<Recording, DspError> {
    let old = rec.sample_rate_hz();
    let (p, q) = rational_ratio(old, new_rate_hz).ok_or(DspError::IrrationalRatio {
        from_hz: old,
        to_hz: new_rate_hz,
    })?;
    if p == q {
        return Ok(rec.clone());
    }
    let out = resample_rows(rec.samples(), p as usize, q as usize);
    Ok(rec.with_samples(new_rate_hz, out)?)
}
