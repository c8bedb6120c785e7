//! Butterworth IIR design and zero-phase (forward-backward) filtering.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use super::DspError;
use crate::recording::Recording;

/// Prototype order of the band-pass filter (the digital band-pass has twice as
/// many poles).
pub const BANDPASS_ORDER: usize = 4;
/// Prototype order of the decimation anti-alias low-pass.
pub const DECIMATE_ORDER: usize = 8;

/// One biquad section, `b` and `a` with `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Transposed direct-form II state for a unit step in steady state.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [
            self.b[1] + self.b[2] - g * (self.a[1] + self.a[2]),
            self.b[2] - g * self.a[2],
        ]
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = self.a[0] + z_inv * (self.a[1] + z_inv * self.a[2]);
        num / den
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Number of poles.
    pub fn order(&self) -> usize {
        self.sections
            .iter()
            .map(|s| if s.a[2] == 0.0 { 1 } else { 2 })
            .sum()
    }

    /// Complex response at `freq_hz` for sample rate `fs`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / fs);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    fn scale(&mut self, gain: f64) {
        if let Some(first) = self.sections.first_mut() {
            first.b.iter_mut().for_each(|b| *b *= gain);
        }
    }

    /// Causal filtering with the given initial input level (steady state).
    fn run(&self, x: &mut [f64], initial_level: f64) {
        let mut level = initial_level;
        for s in &self.sections {
            let zi = s.step_state();
            let mut z1 = zi[0] * level;
            let mut z2 = zi[1] * level;
            level *= s.dc_gain();
            for v in x.iter_mut() {
                let xin = *v;
                let y = s.b[0] * xin + z1;
                z1 = s.b[1] * xin - s.a[1] * y + z2;
                z2 = s.b[2] * xin - s.a[2] * y;
                *v = y;
            }
        }
    }

    /// Zero-phase filtering with odd reflection padding of three times the
    /// filter order at each end.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * self.order()).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let first = x[0];
        let last = x[n - 1];
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let x0 = ext[0];
        self.run(&mut ext, x0);
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, y0);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

fn prototype_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn prewarp(freq_hz: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * freq_hz / fs).tan()
}

fn bilinear(p: Complex64, fs: f64) -> Complex64 {
    let k = 2.0 * fs;
    (k + p) / (k - p)
}

/// Groups digital poles into conjugate pairs (and leftover real poles).
fn pole_sections(mut poles: Vec<Complex64>) -> Vec<[f64; 3]> {
    const TOL: f64 = 1e-12;
    poles.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut out = Vec::new();
    let mut reals = Vec::new();
    for p in poles {
        if p.im > TOL {
            out.push([1.0, -2.0 * p.re, p.norm_sqr()]);
        } else if p.im.abs() <= TOL {
            reals.push(p.re);
        }
    }
    for pair in reals.chunks(2) {
        match pair {
            [r1, r2] => out.push([1.0, -(r1 + r2), r1 * r2]),
            [r] => out.push([1.0, -r, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}

/// Butterworth low-pass as second-order sections, unit DC gain.
pub fn butter_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Sos {
    let wc = prewarp(cutoff_hz, fs);
    let poles: Vec<_> = prototype_poles(order)
        .into_iter()
        .map(|p| bilinear(p * wc, fs))
        .collect();
    let mut sections: Vec<Biquad> = pole_sections(poles)
        .into_iter()
        .map(|a| {
            let b = if a[2] == 0.0 { [1.0, 1.0, 0.0] } else { [1.0, 2.0, 1.0] };
            Biquad { b, a }
        })
        .collect();
    sections.sort_by(|x, y| x.a[2].total_cmp(&y.a[2]));
    let mut sos = Sos { sections };
    let g = sos.response(0.0, fs).norm();
    sos.scale(1.0 / g);
    sos
}

/// Butterworth band-pass (prototype `order`, so `2 * order` poles), unit gain
/// at the warped geometric centre frequency.
pub fn butter_bandpass(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Sos {
    let wl = prewarp(lo_hz, fs);
    let wh = prewarp(hi_hz, fs);
    let bw = wh - wl;
    let w0_sq = wl * wh;
    let mut poles = Vec::with_capacity(2 * order);
    for p in prototype_poles(order) {
        let half = p * bw / 2.0;
        let root = (half * half - w0_sq).sqrt();
        poles.push(bilinear(half + root, fs));
        poles.push(bilinear(half - root, fs));
    }
    let sections = pole_sections(poles)
        .into_iter()
        .map(|a| Biquad {
            b: [1.0, 0.0, -1.0],
            a,
        })
        .collect();
    let mut sos = Sos { sections };
    let f0 = (w0_sq.sqrt() / (2.0 * fs)).atan() * fs / PI;
    let g = sos.response(f0, fs).norm();
    sos.scale(1.0 / g);
    sos
}

pub(crate) fn filtfilt_rows(samples: &Array2<f64>, sos: &Sos) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = samples
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|row| sos.filtfilt(&row.to_vec()))
        .collect();
    let mut out = Array2::zeros(samples.raw_dim());
    for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(rows) {
        dst.assign(&ndarray::ArrayView1::from(&src));
    }
    out
}

/// Zero-phase Butterworth band-pass. `lo_hz == 0` gives a low-pass.
pub fn bandpass(rec: &Recording, lo_hz: f64, hi_hz: f64) -> Result<Recording, DspError> {
    let fs = rec.sample_rate_hz();
    let nyquist = fs / 2.0;
    if !(lo_hz >= 0.0 && lo_hz < hi_hz && hi_hz < nyquist) {
        return Err(DspError::BandOutOfRange {
            lo_hz,
            hi_hz,
            nyquist_hz: nyquist,
        });
    }
    let sos = if lo_hz == 0.0 {
        butter_lowpass(BANDPASS_ORDER, hi_hz, fs)
    } else {
        butter_bandpass(BANDPASS_ORDER, lo_hz, hi_hz, fs)
    };
    let out = filtfilt_rows(rec.samples(), &sos);
    Ok(rec.with_samples(fs, out)?)
}

/// Zero-phase low-pass at 0.8 × the new Nyquist frequency, then every `q`-th
/// sample starting at index 0.
pub fn decimate(rec: &Recording, q: usize) -> Result<Recording, DspError> {
    if q == 0 {
        return Err(DspError::InvalidFactor(q));
    }
    if q == 1 {
        return Ok(rec.clone());
    }
    let fs = rec.sample_rate_hz();
    let cutoff = 0.8 * (fs / 2.0) / q as f64;
    let sos = butter_lowpass(DECIMATE_ORDER, cutoff, fs);
    let filtered = filtfilt_rows(rec.samples(), &sos);
    let kept = filtered
        .slice(ndarray::s![.., ..;q])
        .to_owned();
    Ok(rec.with_samples(fs / q as f64, kept)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    fn rec(rows: Vec<Vec<f64>>, fs: f64) -> Recording {
        let n = rows[0].len();
        let labels = (0..rows.len()).map(|i| format!("ch{i}")).collect();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Recording::new(fs, labels, Array2::from_shape_vec((flat.len() / n, n), flat).unwrap(), 0.0)
            .unwrap()
    }

    fn peak(x: &[f64]) -> f64 {
        x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Analog Butterworth band-pass magnitude at the bilinear-warped frequency;
    /// equals the digital magnitude exactly.
    fn bandpass_magnitude_oracle(order: i32, lo: f64, hi: f64, f: f64, fs: f64) -> f64 {
        let w = |x: f64| 2.0 * fs * (PI * x / fs).tan();
        let (wl, wh, wf) = (w(lo), w(hi), w(f));
        let omega = (wf * wf - wl * wh) / (wf * (wh - wl));
        1.0 / (1.0 + omega.powi(2 * order)).sqrt()
    }

    #[test]
    fn designed_response_matches_analog_oracle() {
        let fs = 125.0;
        let sos = butter_bandpass(4, 1.0, 8.0, fs);
        for f in [0.5, 1.0, 3.0, 8.0, 10.0, 20.0] {
            let got = sos.response(f, fs).norm();
            let want = bandpass_magnitude_oracle(4, 1.0, 8.0, f, fs);
            assert!((got - want).abs() < 1e-9, "f={f}: {got} vs {want}");
        }
        let lp = butter_lowpass(8, 6.4, 512.0);
        assert!((lp.response(0.0, 512.0).norm() - 1.0).abs() < 1e-12);
        assert!((lp.response(6.4, 512.0).norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert_eq!(lp.order(), 8);
        assert_eq!(sos.order(), 8);
    }

    #[test]
    fn passband_sine_keeps_amplitude() {
        let fs = 125.0;
        let r = bandpass(&rec(vec![sine(4.0, fs, 1250)], fs), 1.0, 8.0).unwrap();
        let y = r.samples().row(0).to_vec();
        let mid = &y[125..1125];
        assert!((peak(mid) - 1.0).abs() < 0.05, "{}", peak(mid));
    }

    #[test]
    fn dc_is_rejected() {
        let fs = 125.0;
        let r = bandpass(&rec(vec![vec![3.0; 1000]], fs), 1.0, 8.0).unwrap();
        assert!(peak(&r.samples().row(0).to_vec()) < 0.03);
    }

    /// Least-squares amplitude of a `freq` sinusoid in `x`.
    fn tone_amplitude(x: &[f64], freq: f64, fs: f64) -> f64 {
        let (mut ss, mut sc, mut cc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * freq * i as f64 / fs;
            let (s, c) = ph.sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
            xs += v * s;
            xc += v * c;
        }
        let det = ss * cc - sc * sc;
        let a = (xs * cc - xc * sc) / det;
        let b = (xc * ss - xs * sc) / det;
        a.hypot(b)
    }

    #[test]
    fn stopband_sine_attenuated_at_least_12_db() {
        let fs = 125.0;
        let r = bandpass(&rec(vec![sine(10.0, fs, 125 * 40)], fs), 1.0, 8.0).unwrap();
        let y = r.samples().row(0).to_vec();
        let amp = tone_amplitude(&y[125 * 10..125 * 30], 10.0, fs);
        let db = 20.0 * amp.log10();
        // Two passes square the single-pass magnitude.
        let oracle = bandpass_magnitude_oracle(4, 1.0, 8.0, 10.0, fs).powi(2);
        assert!(db <= -12.0, "{db} dB");
        assert!((amp - oracle).abs() < 1e-3 * oracle.max(1e-3), "{amp} vs {oracle}");
    }

    #[test]
    fn band_validation() {
        let r = rec(vec![vec![0.0; 100]], 125.0);
        assert!(matches!(bandpass(&r, 8.0, 1.0), Err(DspError::BandOutOfRange { .. })));
        assert!(matches!(bandpass(&r, 1.0, 62.5), Err(DspError::BandOutOfRange { .. })));
        assert!(bandpass(&r, 0.0, 40.0).is_ok());
    }

    #[test]
    fn decimate_identity_pass_and_stop() {
        let fs = 512.0;
        let r = rec(vec![sine(3.0, fs, 512 * 8), sine(20.0, fs, 512 * 8)], fs);
        assert_eq!(decimate(&r, 1).unwrap(), r);
        let d = decimate(&r, 32).unwrap();
        assert_eq!(d.sample_rate_hz(), 16.0);
        assert_eq!(d.n_samples(), 128);
        let pass = d.samples().row(0).to_vec();
        assert!((peak(&pass[16..112]) - 1.0).abs() < 0.05);
        let stop = d.samples().row(1).to_vec();
        assert!(20.0 * peak(&stop[16..112]).log10() <= -20.0);
    }

    #[test]
    fn zero_phase_peak_at_lag_zero() {
        let fs = 125.0;
        // Band-limited input: sum of in-band tones.
        let x: Vec<f64> = (0..2000)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * 3.0 * t).sin() + 0.5 * (2.0 * PI * 5.5 * t + 0.3).sin()
            })
            .collect();
        let sos = butter_bandpass(4, 1.0, 8.0, fs);
        let y = sos.filtfilt(&x);
        let xc = |lag: isize| -> f64 {
            (200..1800)
                .map(|i| x[i] * y[(i as isize + lag) as usize])
                .sum()
        };
        let best = (-20..=20).max_by(|a, b| xc(*a).total_cmp(&xc(*b))).unwrap();
        assert_eq!(best, 0);
    }
}
