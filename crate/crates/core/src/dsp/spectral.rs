//! Welch spectra and per-epoch band powers.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, Axis};
use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{DspError, EpochSet};
use crate::recording::Recording;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

/// A frequency band, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub name: BandName,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl BandDefinition {
    pub fn canonical(name: BandName) -> Self {
        let (lo_hz, hi_hz) = match name {
            BandName::Delta => (1.0, 3.0),
            BandName::Theta => (4.0, 6.0),
            BandName::Alpha => (7.0, 13.0),
            BandName::Beta => (14.0, 25.0),
            BandName::Gamma => (26.0, 40.0),
        };
        Self { name, lo_hz, hi_hz }
    }

    /// delta, theta, alpha, beta, gamma.
    pub fn five_bands() -> Vec<Self> {
        use BandName::*;
        [Delta, Theta, Alpha, Beta, Gamma]
            .into_iter()
            .map(Self::canonical)
            .collect()
    }

    /// delta, theta, alpha: the low-frequency variant.
    pub fn three_bands() -> Vec<Self> {
        Self::five_bands().into_iter().take(3).collect()
    }
}

/// Power spectral density in dB (10·log10 µV²/Hz), channels × frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    pub power_db: Array2<f64>,
    pub channel_labels: Vec<String>,
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided, density-scaled, Hann-windowed periodograms of equal-length
/// segments.
struct Periodogram {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    norm: f64,
}

impl Periodogram {
    fn new(len: usize, fs: f64) -> Self {
        let window = hann(len);
        let norm = fs * window.iter().map(|w| w * w).sum::<f64>();
        let fft = FftPlanner::new().plan_fft_forward(len);
        Self { fft, window, norm }
    }

    fn len(&self) -> usize {
        self.window.len()
    }

    fn n_bins(&self) -> usize {
        self.len() / 2 + 1
    }

    /// Adds the periodogram of `segment` (mean removed) into `acc`.
    fn accumulate(&self, segment: ArrayView1<'_, f64>, acc: &mut [f64]) {
        let n = self.len();
        let mean = segment.sum() / n as f64;
        let mut buf: Vec<Complex64> = segment
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex64::new((x - mean) * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        for (k, slot) in acc.iter_mut().enumerate().take(self.n_bins()) {
            let mut p = buf[k].norm_sqr() / self.norm;
            if k != 0 && !(n % 2 == 0 && k == n / 2) {
                p *= 2.0;
            }
            *slot += p;
        }
    }
}

fn welch_segments(n: usize, nperseg: usize) -> impl Iterator<Item = usize> {
    let step = nperseg - nperseg / 2;
    (0..).map(move |i| i * step).take_while(move |&s| s + nperseg <= n)
}

fn crop(
    fs: f64,
    nperseg: usize,
    power: &Array2<f64>,
    fmin: f64,
    fmax: f64,
    labels: Vec<String>,
) -> Spectrum {
    let df = fs / nperseg as f64;
    let bins: Vec<usize> = (0..power.ncols())
        .filter(|&k| {
            let f = k as f64 * df;
            f >= fmin - 1e-9 && f <= fmax + 1e-9
        })
        .collect();
    let freqs_hz = bins.iter().map(|&k| k as f64 * df).collect();
    let power_db = power
        .select(Axis(1), &bins)
        .mapv(|p| 10.0 * p.max(f64::MIN_POSITIVE).log10());
    Spectrum {
        freqs_hz,
        power_db,
        channel_labels: labels,
    }
}

fn check_range(fs: f64, fmin: f64, fmax: f64) -> Result<(), DspError> {
    if !(fmin >= 0.0 && fmin <= fmax && fmax < fs / 2.0) {
        return Err(DspError::BandOutOfRange {
            lo_hz: fmin,
            hi_hz: fmax,
            nyquist_hz: fs / 2.0,
        });
    }
    Ok(())
}

/// Welch estimate with 1 s Hann windows and 50 % overlap, cropped to
/// `[fmin_hz, fmax_hz]`.
pub fn psd(rec: &Recording, fmin_hz: f64, fmax_hz: f64) -> Result<Spectrum, DspError> {
    let fs = rec.sample_rate_hz();
    check_range(fs, fmin_hz, fmax_hz)?;
    let nperseg = fs.round() as usize;
    if rec.n_samples() < 2 * nperseg {
        return Err(DspError::TooShort {
            samples: rec.n_samples(),
            needed: 2 * nperseg,
        });
    }
    let pg = Periodogram::new(nperseg, fs);
    let mut power = Array2::zeros((rec.n_channels(), pg.n_bins()));
    for (row, mut acc) in rec.samples().outer_iter().zip(power.outer_iter_mut()) {
        let acc = acc.as_slice_mut().expect("contiguous row");
        let mut count = 0;
        for s in welch_segments(row.len(), nperseg) {
            pg.accumulate(row.slice(ndarray::s![s..s + nperseg]), acc);
            count += 1;
        }
        acc.iter_mut().for_each(|v| *v /= count as f64);
    }
    Ok(crop(fs, nperseg, &power, fmin_hz, fmax_hz, rec.channel_labels().to_vec()))
}

/// Grand-average Welch spectrum over all segments of all trials in `epochs`.
pub fn psd_epochs(epochs: &EpochSet, fmin_hz: f64, fmax_hz: f64) -> Result<Spectrum, DspError> {
    let fs = epochs.sample_rate_hz();
    check_range(fs, fmin_hz, fmax_hz)?;
    let nperseg = fs.round() as usize;
    if epochs.n_samples() < nperseg {
        return Err(DspError::TooShort {
            samples: epochs.n_samples(),
            needed: nperseg,
        });
    }
    let pg = Periodogram::new(nperseg, fs);
    let mut power = Array2::zeros((epochs.n_channels(), pg.n_bins()));
    let mut count = 0usize;
    for trial in epochs.data().outer_iter() {
        for s in welch_segments(epochs.n_samples(), nperseg) {
            for (row, mut acc) in trial.outer_iter().zip(power.outer_iter_mut()) {
                pg.accumulate(
                    row.slice(ndarray::s![s..s + nperseg]),
                    acc.as_slice_mut().expect("contiguous row"),
                );
            }
            count += 1;
        }
    }
    power.mapv_inplace(|v| v / count as f64);
    Ok(crop(fs, nperseg, &power, fmin_hz, fmax_hz, epochs.channel_labels().to_vec()))
}

/// Per trial, per channel, per band: natural log of the mean periodogram
/// power over the band's bins. Features are channel-major
/// (`channel * n_bands + band`).
pub fn bandpower_features(
    epochs: &EpochSet,
    bands: &[BandDefinition],
) -> Result<Array2<f64>, DspError> {
    let fs = epochs.sample_rate_hz();
    let n = epochs.n_samples();
    let df = fs / n as f64;
    let mut band_bins = Vec::with_capacity(bands.len());
    for b in bands {
        if !(b.lo_hz > 0.0 && b.lo_hz < b.hi_hz && b.hi_hz < fs / 2.0) || (n as f64 / fs) < 1.0 / b.lo_hz
        {
            return Err(DspError::BandOutOfRange {
                lo_hz: b.lo_hz,
                hi_hz: b.hi_hz,
                nyquist_hz: fs / 2.0,
            });
        }
        let lo = (b.lo_hz / df - 1e-9).ceil() as usize;
        let hi = (b.hi_hz / df + 1e-9).floor() as usize;
        if lo > hi {
            return Err(DspError::BandOutOfRange {
                lo_hz: b.lo_hz,
                hi_hz: b.hi_hz,
                nyquist_hz: fs / 2.0,
            });
        }
        band_bins.push(lo..=hi);
    }

    let pg = Periodogram::new(n, fs);
    let n_ch = epochs.n_channels();
    let mut features = Array2::zeros((epochs.n_trials(), n_ch * bands.len()));
    let mut acc = vec![0.0; pg.n_bins()];
    for (trial, mut out) in epochs.data().outer_iter().zip(features.outer_iter_mut()) {
        for (c, row) in trial.outer_iter().enumerate() {
            acc.iter_mut().for_each(|v| *v = 0.0);
            pg.accumulate(row, &mut acc);
            for (b, bins) in band_bins.iter().enumerate() {
                let width = bins.clone().count() as f64;
                let mean = acc[bins.clone()].iter().sum::<f64>() / width;
                out[c * bands.len() + b] = mean.max(f64::MIN_POSITIVE).ln();
            }
        }
    }
    Ok(features)
}
