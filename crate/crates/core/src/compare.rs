//! Side-by-side analysis of one session recorded through two amplifiers:
//! time shift and polarity of the averaged ERP, per-channel correlation of
//! ERPs and spectra, and paired tests on the cross-validated AUROCCs.

use indexmap::IndexMap;
use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{sample_sd, wilcoxon_signed_rank, CvResult, WilcoxonResult};
use crate::dsp::{bandpass, epochize, psd_epochs, resample, BandDefinition, BandName, DspError, EpochSet};
use crate::pipeline::{p300_crossval, workload_crossval, BandSet, P300Params, PipelineError, WorkloadParams};
use crate::recording::{EventCode, EventList, Recording, RecordingError};
use crate::synth::Polarity;

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("signal has zero variance")]
    DegenerateSignal,
    #[error("every channel has zero variance")]
    ZeroVariance,
    #[error("no epochs of class {0}")]
    ClassMissing(EventCode),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sessions are not comparable: {0}")]
    IncompatibleSessions(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Recording(#[from] RecordingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    P300,
    Workload,
}

/// Best alignment of two equal-rate signals. A positive `lag` means `b`
/// trails `a`: `b[i + lag] ≈ sign · a[i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagEstimate {
    pub lag: i64,
    pub sign: Polarity,
    /// Correlation at the chosen lag.
    pub r: f64,
}

const MIN_OVERLAP: usize = 3;

/// Start in `a`, start in `b` and length of the overlap at `lag`.
fn bounds(n: usize, lag: i64) -> (usize, usize, usize) {
    let shift = lag.unsigned_abs() as usize;
    let len = n.saturating_sub(shift);
    if lag >= 0 {
        (0, shift.min(n), len)
    } else {
        (shift.min(n), 0, len)
    }
}

/// Overlapping parts of `a` and `b` once `b` is moved back by `lag`.
fn overlap<'a>(a: ArrayView1<'a, f64>, b: ArrayView1<'a, f64>, lag: i64) -> (ArrayView1<'a, f64>, ArrayView1<'a, f64>) {
    let (a0, b0, len) = bounds(a.len(), lag);
    (
        a.slice_move(s![a0..a0 + len]),
        b.slice_move(s![b0..b0 + len]),
    )
}

/// Pearson correlation, `None` when either side is constant. Clamped to
/// `[-1, 1]`.
pub fn pearson(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.sum() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    // Written so that y = ±x gives exactly ±1.
    Some((sxy / sxx * (sxx / syy).sqrt()).clamp(-1.0, 1.0))
}

/// Normalized cross-correlation over lags `-max_lag..=max_lag`; the lag with
/// the largest |r| wins, ties going to the smaller |lag| (and to the positive
/// one of a ± pair). Lags leaving fewer than three overlapping samples are
/// not scanned.
pub fn estimate_lag(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, max_lag: usize) -> Result<LagEstimate, CompareError> {
    if a.len() != b.len() {
        return Err(CompareError::ShapeMismatch(format!("lengths {} and {}", a.len(), b.len())));
    }
    if a.len() < MIN_OVERLAP {
        return Err(CompareError::ShapeMismatch(format!("{} samples", a.len())));
    }
    if pearson(a, a).is_none() || pearson(b, b).is_none() {
        return Err(CompareError::DegenerateSignal);
    }
    let max_lag = max_lag.min(a.len() - MIN_OVERLAP) as i64;
    let mut best: Option<(i64, f64)> = None;
    for step in 0..=max_lag {
        for lag in if step == 0 { vec![0] } else { vec![step, -step] } {
            let (x, y) = overlap(a, b, lag);
            let Some(r) = pearson(x, y) else { continue };
            if best.is_none_or(|(_, br)| r.abs() > br.abs()) {
                best = Some((lag, r));
            }
        }
    }
    let (lag, r) = best.ok_or(CompareError::DegenerateSignal)?;
    Ok(LagEstimate {
        lag,
        sign: if r < 0.0 { Polarity::Inverted } else { Polarity::Normal },
        r,
    })
}

/// Per-row alignment of `b` onto `a` for a given lag and polarity: both are
/// trimmed to the overlap and `b` is multiplied by the sign.
pub fn align_pair(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, lag: i64, sign: Polarity) -> (Array2<f64>, Array2<f64>) {
    let (a0, b0, len) = bounds(a.ncols(), lag);
    let aa = a.slice(s![.., a0..a0 + len]).to_owned();
    let bb = b.slice(s![.., b0..b0 + len]).mapv(|v| v * sign.sign());
    (aa, bb)
}

/// Trial average of one class, channels × samples. Overlapping epochs are
/// fine here.
pub fn average_erp(epochs: &EpochSet, code: EventCode) -> Result<Array2<f64>, CompareError> {
    let idx: Vec<usize> = (0..epochs.n_trials()).filter(|&i| epochs.labels()[i] == code).collect();
    if idx.is_empty() {
        return Err(CompareError::ClassMissing(code));
    }
    let mut sum = Array2::zeros((epochs.n_channels(), epochs.n_samples()));
    for &i in &idx {
        sum += &epochs.data().index_axis(Axis(0), i);
    }
    Ok(sum / idx.len() as f64)
}

/// Per-channel Pearson correlations between two matched matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCorrelation {
    pub r: IndexMap<String, f64>,
    /// Channels with a constant row on either side; absent from `r`.
    pub zero_variance: Vec<String>,
    pub mean: f64,
    /// Sample standard deviation (n − 1) across channels.
    pub sd: f64,
}

pub fn pearson_per_channel(
    labels: &[String],
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Result<ChannelCorrelation, CompareError> {
    if x.dim() != y.dim() || labels.len() != x.nrows() {
        return Err(CompareError::ShapeMismatch(format!(
            "{:?} vs {:?} with {} labels",
            x.dim(),
            y.dim(),
            labels.len()
        )));
    }
    if x.ncols() < MIN_OVERLAP {
        return Err(CompareError::ShapeMismatch(format!("{} samples per channel", x.ncols())));
    }
    let rs: Vec<Option<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|c| pearson(x.row(c), y.row(c)))
        .collect();
    let mut r = IndexMap::new();
    let mut zero_variance = Vec::new();
    for (label, v) in labels.iter().zip(rs) {
        match v {
            Some(v) => {
                r.insert(label.clone(), v);
            }
            None => zero_variance.push(label.clone()),
        }
    }
    if r.is_empty() {
        return Err(CompareError::ZeroVariance);
    }
    let values: Vec<f64> = r.values().copied().collect();
    Ok(ChannelCorrelation {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        sd: sample_sd(&values),
        r,
        zero_variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub erp_band_hz: (f64, f64),
    pub erp_window_s: (f64, f64),
    pub max_lag_s: f64,
    pub spectrum_range_hz: (f64, f64),
    /// Run both classification chains and the paired tests.
    pub classify: bool,
    pub cv_seed: u64,
    pub p300: P300Params,
    pub workload: WorkloadParams,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            erp_band_hz: (1.0, 8.0),
            erp_window_s: (-0.5, 1.0),
            max_lag_s: 0.5,
            spectrum_range_hz: (1.0, 40.0),
            classify: true,
            cv_seed: 0,
            p300: P300Params::default(),
            workload: WorkloadParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagReport {
    pub lag_samples: i64,
    pub lag_s: f64,
    pub polarity: Polarity,
    /// Grand-average correlation at the chosen lag, before sign correction.
    pub r_at_lag: f64,
    /// Samples removed from each trace by the shift.
    pub trimmed_samples: usize,
    /// Samples per channel that entered the ERP correlation.
    pub compared_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpPair<T> {
    pub amp_a: T,
    pub amp_b: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineComparison {
    pub cv: AmpPair<CvResult>,
    /// Paired over repeats, `a − b`.
    pub wilcoxon: WilcoxonResult,
}

/// Averaged traces behind the correlations, for plotting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Traces {
    pub channel_labels: Vec<String>,
    /// ERP time axis (s, relative to the target) and aligned, sign-corrected
    /// averages.
    pub erp_times_s: Vec<f64>,
    pub erp: Option<AmpPair<Array2<f64>>>,
    pub freqs_hz: Vec<f64>,
    /// Condition name → dB spectra.
    pub spectra: IndexMap<String, AmpPair<Array2<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub task: Task,
    /// Rate both recordings were brought to.
    pub comparison_rate_hz: f64,
    pub rates_hz: AmpPair<f64>,
    pub lag: Option<LagReport>,
    pub erp: Option<ChannelCorrelation>,
    /// Condition name → spectral correlation, computed on `spectrum_unit`
    /// power.
    pub spectra: IndexMap<String, ChannelCorrelation>,
    pub spectrum_unit: String,
    /// Condition name → mean alpha-band power across channels, dB.
    pub alpha_power_db: IndexMap<String, AmpPair<f64>>,
    /// Pipeline name → per-amplifier cross-validation and paired test.
    pub classification: IndexMap<String, PipelineComparison>,
    #[serde(skip)]
    pub traces: Traces,
}

impl ComparisonReport {
    pub fn wilcoxon_p(&self) -> IndexMap<String, f64> {
        self.classification
            .iter()
            .map(|(k, v)| (k.clone(), v.wilcoxon.p_two_sided))
            .collect()
    }
}

fn check_sessions(a: &Recording, b: &Recording, events: &EventList) -> Result<(), CompareError> {
    if a.channel_labels() != b.channel_labels() {
        return Err(CompareError::IncompatibleSessions(format!(
            "channels {:?} vs {:?}",
            a.channel_labels(),
            b.channel_labels()
        )));
    }
    for (name, rec) in [("A", a), ("B", b)] {
        if let Err(e) = events.check_within(rec.duration_s()) {
            return Err(CompareError::IncompatibleSessions(format!("amplifier {name}: {e}")));
        }
    }
    Ok(())
}

fn to_rate(rec: &Recording, rate: f64) -> Result<Recording, CompareError> {
    if rec.sample_rate_hz() == rate {
        Ok(rec.clone())
    } else {
        Ok(resample(rec, rate)?)
    }
}

fn condition_name(code: EventCode) -> String {
    code.name().to_string()
}

/// Runs the full comparison of one task between amplifiers A and B. Both
/// recordings must share channel labels and cover every event.
pub fn compare_session(
    rec_a: &Recording,
    rec_b: &Recording,
    events: &EventList,
    task: Task,
    cfg: &CompareConfig,
) -> Result<ComparisonReport, CompareError> {
    check_sessions(rec_a, rec_b, events)?;
    let rate = rec_a.sample_rate_hz().min(rec_b.sample_rate_hz());
    let a = to_rate(rec_a, rate)?;
    let b = to_rate(rec_b, rate)?;
    let labels = a.channel_labels().to_vec();

    let mut report = ComparisonReport {
        task,
        comparison_rate_hz: rate,
        rates_hz: AmpPair {
            amp_a: rec_a.sample_rate_hz(),
            amp_b: rec_b.sample_rate_hz(),
        },
        lag: None,
        erp: None,
        spectra: IndexMap::new(),
        spectrum_unit: "dB".into(),
        alpha_power_db: IndexMap::new(),
        classification: IndexMap::new(),
        traces: Traces {
            channel_labels: labels.clone(),
            ..Traces::default()
        },
    };

    let mut polarity = Polarity::Normal;
    match task {
        Task::P300 => {
            let (lo, hi) = cfg.erp_band_hz;
            let (t0, t1) = cfg.erp_window_s;
            let ea = epochize(&bandpass(&a, lo, hi)?, events, &[EventCode::Target], t0, t1)?;
            let eb = epochize(&bandpass(&b, lo, hi)?, events, &[EventCode::Target], t0, t1)?;
            let erp_a = average_erp(&ea, EventCode::Target)?;
            let erp_b = average_erp(&eb, EventCode::Target)?;
            let ga_a = erp_a.mean_axis(Axis(0)).expect("channels");
            let ga_b = erp_b.mean_axis(Axis(0)).expect("channels");
            let max_lag = (cfg.max_lag_s * rate).round() as usize;
            let est = estimate_lag(ga_a.view(), ga_b.view(), max_lag)?;
            polarity = est.sign;
            let (al_a, al_b) = align_pair(erp_a.view(), erp_b.view(), est.lag, est.sign);
            report.erp = Some(pearson_per_channel(&labels, al_a.view(), al_b.view())?);
            report.lag = Some(LagReport {
                lag_samples: est.lag,
                lag_s: est.lag as f64 / rate,
                polarity: est.sign,
                r_at_lag: est.r,
                trimmed_samples: est.lag.unsigned_abs() as usize,
                compared_samples: al_a.ncols(),
            });
            let offset = (t0 * rate).round() as i64;
            let a_start = if est.lag >= 0 { 0 } else { -est.lag };
            report.traces.erp_times_s = (0..al_a.ncols() as i64)
                .map(|i| (offset + a_start + i) as f64 / rate)
                .collect();
            report.traces.erp = Some(AmpPair { amp_a: al_a, amp_b: al_b });
        }
        Task::Workload => {
            let (fmin, fmax) = cfg.spectrum_range_hz;
            let alpha = BandDefinition::canonical(BandName::Alpha);
            for code in [EventCode::Cond0Back, EventCode::Cond2Back] {
                let name = condition_name(code);
                let sa = psd_epochs(&epochize(&a, events, &[code], 0.0, cfg.workload.trial_s)?, fmin, fmax)?;
                let sb = psd_epochs(&epochize(&b, events, &[code], 0.0, cfg.workload.trial_s)?, fmin, fmax)?;
                report
                    .spectra
                    .insert(name.clone(), pearson_per_channel(&labels, sa.power_db.view(), sb.power_db.view())?);
                let bins: Vec<usize> = (0..sa.freqs_hz.len())
                    .filter(|&k| sa.freqs_hz[k] >= alpha.lo_hz && sa.freqs_hz[k] <= alpha.hi_hz)
                    .collect();
                let band_mean = |p: &Array2<f64>| p.select(Axis(1), &bins).mean().unwrap_or(f64::NAN);
                report.alpha_power_db.insert(
                    name.clone(),
                    AmpPair {
                        amp_a: band_mean(&sa.power_db),
                        amp_b: band_mean(&sb.power_db),
                    },
                );
                report.traces.freqs_hz = sa.freqs_hz.clone();
                report.traces.spectra.insert(
                    name,
                    AmpPair {
                        amp_a: sa.power_db,
                        amp_b: sb.power_db,
                    },
                );
            }
        }
    }

    if cfg.classify {
        // Classification runs on each amplifier's native rate; B is flipped
        // back first when it came out inverted.
        let b_native = if polarity == Polarity::Inverted {
            rec_b.with_samples(rec_b.sample_rate_hz(), rec_b.samples().mapv(|v| -v))?
        } else {
            rec_b.clone()
        };
        let runs: Vec<(String, CvResult, CvResult)> = match task {
            Task::P300 => vec![(
                "p300".to_string(),
                p300_crossval(rec_a, events, &cfg.p300, cfg.cv_seed)?,
                p300_crossval(&b_native, events, &cfg.p300, cfg.cv_seed)?,
            )],
            Task::Workload => [BandSet::Five, BandSet::Three]
                .into_iter()
                .map(|bands| {
                    let params = WorkloadParams { bands, ..cfg.workload.clone() };
                    Ok((
                        bands.name().to_string(),
                        workload_crossval(rec_a, events, &params, cfg.cv_seed)?,
                        workload_crossval(&b_native, events, &params, cfg.cv_seed)?,
                    ))
                })
                .collect::<Result<_, PipelineError>>()?,
        };
        for (name, cv_a, cv_b) in runs {
            let pairs: Vec<(f64, f64)> = cv_a
                .per_repeat_auroc
                .iter()
                .copied()
                .zip(cv_b.per_repeat_auroc.iter().copied())
                .collect();
            report.classification.insert(
                name,
                PipelineComparison {
                    wilcoxon: wilcoxon_signed_rank(&pairs),
                    cv: AmpPair { amp_a: cv_a, amp_b: cv_b },
                },
            );
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(n: usize, seed: u64) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0))
    }

    /// `b[i + k] = a[i]`, wrapping around.
    fn shifted(a: &Array1<f64>, k: i64) -> Array1<f64> {
        let n = a.len() as i64;
        Array1::from_shape_fn(a.len(), |i| a[((i as i64 - k).rem_euclid(n)) as usize])
    }

    #[test]
    fn shift_by_eleven() {
        let a = random_signal(200, 1);
        let est = estimate_lag(a.view(), shifted(&a, 11).view(), 62).unwrap();
        assert_eq!(est.lag, 11);
        assert_eq!(est.sign, Polarity::Normal);
        assert_abs_diff_eq!(est.r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_signals() {
        let a = random_signal(100, 2);
        let est = estimate_lag(a.view(), a.view(), 20).unwrap();
        assert_eq!((est.lag, est.sign), (0, Polarity::Normal));
    }

    #[test]
    fn negated_shift() {
        let a = random_signal(150, 3);
        let b = shifted(&a, 4).mapv(|v| -v);
        let est = estimate_lag(a.view(), b.view(), 30).unwrap();
        assert_eq!((est.lag, est.sign), (4, Polarity::Inverted));
        let est = estimate_lag(b.view(), a.view(), 30).unwrap();
        assert_eq!((est.lag, est.sign), (-4, Polarity::Inverted));
    }

    #[test]
    fn constant_signal_is_degenerate() {
        let a = random_signal(50, 4);
        let b = Array1::from_elem(50, 3.0);
        assert_eq!(estimate_lag(a.view(), b.view(), 5), Err(CompareError::DegenerateSignal));
        assert!(matches!(
            estimate_lag(a.view(), a.slice(s![..40]), 5),
            Err(CompareError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn ties_prefer_small_lags() {
        // Period-4 signal: lags 0 and ±4 correlate perfectly.
        let a = Array1::from_shape_fn(40, |i| [1.0, 3.0, -2.0, 0.5][i % 4]);
        let est = estimate_lag(a.view(), a.view(), 10).unwrap();
        assert_eq!(est.lag, 0);
        let est = estimate_lag(a.view(), shifted(&a, 2).view(), 10).unwrap();
        assert_eq!(est.lag, 2);
    }

    #[test]
    fn max_lag_is_clamped_to_overlap() {
        let a = array![1.0, 2.0, 0.0, 5.0];
        let est = estimate_lag(a.view(), a.view(), 100).unwrap();
        assert_eq!(est.lag, 0);
    }

    fn epoch_set(trials: Vec<Array2<f64>>, codes: Vec<EventCode>) -> EpochSet {
        let (c, t) = trials[0].dim();
        let n = trials.len();
        let mut data = Array3::zeros((n, c, t));
        for (i, tr) in trials.iter().enumerate() {
            data.index_axis_mut(Axis(0), i).assign(tr);
        }
        let labels = (0..c).map(|i| format!("ch{i}")).collect();
        EpochSet::new(data, codes, (0..n).map(|i| i * t).collect(), 0.0, 100.0, labels).unwrap()
    }

    #[test]
    fn average_of_single_trial() {
        let x = array![[1.0, 2.0, 3.0], [-1.0, 0.0, 4.0]];
        let ep = epoch_set(vec![x.clone()], vec![EventCode::Target]);
        assert_eq!(average_erp(&ep, EventCode::Target).unwrap(), x);
        assert_eq!(average_erp(&ep, EventCode::Distractor), Err(CompareError::ClassMissing(EventCode::Distractor)));
    }

    #[test]
    fn opposite_trials_cancel() {
        let x = array![[1.0, 2.0, 3.0], [-1.0, 0.0, 4.0]];
        let y = array![[9.0, 9.0, 9.0], [9.0, 9.0, 9.0]];
        let ep = epoch_set(
            vec![x.clone(), y, -x],
            vec![EventCode::Target, EventCode::Distractor, EventCode::Target],
        );
        assert_eq!(average_erp(&ep, EventCode::Target).unwrap(), Array2::<f64>::zeros((2, 3)));
    }

    #[test]
    fn pearson_identity_and_negation() {
        let labels: Vec<String> = vec!["a".into(), "b".into()];
        let x = array![[1.0, 2.0, 4.0, 3.0], [0.0, -1.0, 5.0, 2.0]];
        let c = pearson_per_channel(&labels, x.view(), x.view()).unwrap();
        assert!(c.r.values().all(|&r| r == 1.0));
        assert_eq!(c.sd, 0.0);
        let c = pearson_per_channel(&labels, x.view(), (-&x).view()).unwrap();
        assert!(c.r.values().all(|&r| r == -1.0));
    }

    #[test]
    fn zero_variance_channel_flagged() {
        let labels: Vec<String> = vec!["a".into(), "flat".into(), "c".into()];
        let x = array![[1.0, 2.0, 4.0], [1.0, 1.0, 1.0], [3.0, 0.0, 1.0]];
        let y = array![[2.0, 2.5, 5.0], [0.0, 1.0, 2.0], [1.0, 0.0, 3.0]];
        let c = pearson_per_channel(&labels, x.view(), y.view()).unwrap();
        assert_eq!(c.zero_variance, vec!["flat".to_string()]);
        assert_eq!(c.r.keys().collect::<Vec<_>>(), vec!["a", "c"]);
        assert_abs_diff_eq!(c.mean, (c.r["a"] + c.r["c"]) / 2.0, epsilon = 1e-15);
        let flat = Array2::from_elem((3, 3), 1.0);
        assert_eq!(pearson_per_channel(&labels, flat.view(), y.view()), Err(CompareError::ZeroVariance));
    }

    #[test]
    fn hand_computed_pearson() {
        // x = 1..5, y = (2, 4, 5, 4, 5): sxy = 6, sxx = 10, syy = 6
        let r = pearson(array![1.0, 2.0, 3.0, 4.0, 5.0].view(), array![2.0, 4.0, 5.0, 4.0, 5.0].view()).unwrap();
        assert_abs_diff_eq!(r, 6.0 / 60f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn align_then_correlate_pure_shift() {
        let a = random_signal(300, 5);
        let b = shifted(&a, -7).mapv(|v| -2.0 * v + 1.0);
        let est = estimate_lag(a.view(), b.view(), 50).unwrap();
        assert_eq!((est.lag, est.sign), (-7, Polarity::Inverted));
        let a2 = a.clone().insert_axis(Axis(0));
        let b2 = b.insert_axis(Axis(0));
        let (x, y) = align_pair(a2.view(), b2.view(), est.lag, est.sign);
        assert_eq!(x.ncols(), 293);
        assert_abs_diff_eq!(pearson(x.row(0), y.row(0)).unwrap(), 1.0, epsilon = 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn recovers_any_shift(seed in 0u64..1000, k in -20i64..=20) {
            let a = random_signal(120, seed);
            let b = shifted(&a, k);
            prop_assert_eq!(estimate_lag(a.view(), b.view(), 20).unwrap().lag, k);
        }

        #[test]
        fn lag_is_antisymmetric(seed in 0u64..1000, k in -15i64..=15) {
            let a = random_signal(100, seed);
            let b = shifted(&a, k);
            let ab = estimate_lag(a.view(), b.view(), 15).unwrap();
            let ba = estimate_lag(b.view(), a.view(), 15).unwrap();
            prop_assert_eq!(ab.lag, -ba.lag);
        }

        #[test]
        fn pearson_affine_invariant(seed in 0u64..1000, s1 in 0.01f64..100.0, o1 in -50.0f64..50.0, s2 in 0.01f64..100.0, o2 in -50.0f64..50.0) {
            let x = random_signal(40, seed);
            let y = random_signal(40, seed + 1) + &x * 0.5;
            let r = pearson(x.view(), y.view()).unwrap();
            let r2 = pearson(x.mapv(|v| s1 * v + o1).view(), y.mapv(|v| s2 * v + o2).view()).unwrap();
            prop_assert!((r - r2).abs() <= 1e-12, "{} vs {}", r, r2);
        }

        #[test]
        fn mean_matches_map(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((6, 20), |_| rng.random_range(-1.0..1.0));
            let y = Array2::from_shape_fn((6, 20), |_| rng.random_range(-1.0..1.0)) + &x;
            let labels: Vec<String> = (0..6).map(|i| format!("c{i}")).collect();
            let c = pearson_per_channel(&labels, x.view(), y.view()).unwrap();
            let m = c.r.values().sum::<f64>() / 6.0;
            prop_assert!((c.mean - m).abs() <= 1e-12);
            prop_assert!(c.r.values().all(|r| (-1.0..=1.0).contains(r)));
        }
    }
}
