//! Supervised spatial filters: common spatial patterns for band-power
//! features and a shrinkage-regularized Fisher filter for ERP features.

use nalgebra::DMatrix;
use ndarray::{Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{shrunk_covariance, ClassifyError, Shrinkage};
use crate::dsp::EpochSet;
use crate::linalg::{canonical_sign, generalized_symmetric_eigen, to_dmatrix};
use crate::recording::{EventCode, Recording, RecordingError};

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("covariance is singular or not positive definite")]
    SingularCovariance,
    #[error("class {0} has fewer than two trials")]
    ClassMissing(EventCode),
    #[error("epochs hold more than two classes: {0:?}")]
    TooManyClasses(Vec<EventCode>),
    #[error("cannot return {requested} filters from {channels} channels")]
    InvalidFilterCount { requested: usize, channels: usize },
    #[error("bank trained on {expected:?}, input has {found:?}")]
    ChannelMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error(transparent)]
    Shrinkage(#[from] ClassifyError),
    #[error(transparent)]
    Recording(#[from] RecordingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialMethod {
    Csp,
    FisherEigen,
}

impl SpatialMethod {
    fn channel_prefix(self) -> &'static str {
        match self {
            SpatialMethod::Csp => "csp",
            SpatialMethod::FisherEigen => "fisher",
        }
    }
}

/// `n_out × n_in` linear map from input channels to virtual channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialFilterBank {
    #[serde(with = "rows")]
    pub weights: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    pub method: SpatialMethod,
    pub trained_on: Vec<String>,
    /// Set when the classes carried no separable signal (Fisher with equal
    /// class means); the filters are then arbitrary.
    #[serde(default)]
    pub degenerate: bool,
}

mod rows {
    use ndarray::Array2;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = a.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged weight rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Array2::from_shape_vec((rows.len(), ncols), flat).map_err(D::Error::custom)
    }
}

impl SpatialFilterBank {
    pub fn n_out(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_labels(&self) -> Vec<String> {
        let prefix = self.method.channel_prefix();
        (1..=self.n_out()).map(|i| format!("{prefix}{i}")).collect()
    }

    fn check_channels(&self, labels: &[String]) -> Result<(), SpatialError> {
        if labels != self.trained_on.as_slice() {
            return Err(SpatialError::ChannelMismatch {
                expected: self.trained_on.clone(),
                found: labels.to_vec(),
            });
        }
        Ok(())
    }
}

/// Inputs a bank can be applied to.
pub trait Filterable: Sized {
    fn filter_with(&self, bank: &SpatialFilterBank) -> Result<Self, SpatialError>;
}

impl Filterable for Recording {
    fn filter_with(&self, bank: &SpatialFilterBank) -> Result<Self, SpatialError> {
        bank.check_channels(self.channel_labels())?;
        let out = bank.weights.dot(self.samples());
        Ok(Recording::new(
            self.sample_rate_hz(),
            bank.output_labels(),
            out,
            self.start_time_s(),
        )?)
    }
}

impl Filterable for EpochSet {
    fn filter_with(&self, bank: &SpatialFilterBank) -> Result<Self, SpatialError> {
        bank.check_channels(self.channel_labels())?;
        let mut out = Array3::zeros((self.n_trials(), bank.n_out(), self.n_samples()));
        for (mut dst, src) in out.outer_iter_mut().zip(self.data().outer_iter()) {
            dst.assign(&bank.weights.dot(&src));
        }
        Ok(self.with_channels(out, bank.output_labels()))
    }
}

/// Applies the bank; each output channel is `weights[k, :] · x`.
pub fn apply_filters<T: Filterable>(bank: &SpatialFilterBank, x: &T) -> Result<T, SpatialError> {
    x.filter_with(bank)
}

/// Trial indices of `positive` and of the one other class, each in a
/// canonical order (by start sample) so trial permutations do not change the
/// floating-point sums.
fn split_classes(epochs: &EpochSet, positive: EventCode) -> Result<[Vec<usize>; 2], SpatialError> {
    let mut others: Vec<EventCode> = epochs.labels().iter().copied().filter(|&c| c != positive).collect();
    others.sort();
    others.dedup();
    if others.len() > 1 {
        return Err(SpatialError::TooManyClasses(others));
    }
    let canonical = |mut v: Vec<usize>| {
        v.sort_by_key(|&i| (epochs.start_samples()[i], i));
        v
    };
    let pos = canonical((0..epochs.n_trials()).filter(|&i| epochs.labels()[i] == positive).collect());
    let neg = canonical((0..epochs.n_trials()).filter(|&i| epochs.labels()[i] != positive).collect());
    if pos.len() < 2 {
        return Err(SpatialError::ClassMissing(positive));
    }
    if neg.len() < 2 {
        return Err(SpatialError::ClassMissing(others.first().copied().unwrap_or(positive)));
    }
    Ok([pos, neg])
}

fn trace_normalized_cov(trial: ArrayView2<'_, f64>) -> Array2<f64> {
    let mean = trial.mean_axis(Axis(1)).expect("non-empty epoch");
    let centered = &trial - &mean.insert_axis(Axis(1));
    let c = centered.dot(&centered.t());
    let tr = c.diag().sum();
    if tr > 0.0 {
        c / tr
    } else {
        c
    }
}

/// Eigenvector columns of `A w = λ B w` as rows, sign-canonicalized, ordered
/// by descending λ with ties broken lexicographically on the row.
fn sorted_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<(f64, Vec<f64>)>, SpatialError> {
    let (values, vectors) = generalized_symmetric_eigen(a, b).map_err(|_| SpatialError::SingularCovariance)?;
    let mut rows: Vec<(f64, Vec<f64>)> = (0..values.len())
        .map(|k| {
            let mut w: Vec<f64> = vectors.column(k).iter().copied().collect();
            canonical_sign(&mut w);
            (values[k], w)
        })
        .collect();
    if rows.iter().any(|(l, w)| !l.is_finite() || w.iter().any(|x| !x.is_finite())) {
        return Err(SpatialError::SingularCovariance);
    }
    rows.sort_by(|(la, wa), (lb, wb)| {
        lb.total_cmp(la).then_with(|| {
            wa.iter()
                .zip(wb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    Ok(rows)
}

fn quad(w: &[f64], m: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    for (i, wi) in w.iter().enumerate() {
        for (j, wj) in w.iter().enumerate() {
            s += wi * m[[i, j]] * wj;
        }
    }
    s
}

/// Common spatial patterns between `positive` trials (C1) and the other class
/// (C2). Returns `n_filters / 2` filters with the largest and as many with the
/// smallest `λ = wᵀC1w / wᵀ(C1+C2)w`, in descending λ order, each scaled so
/// `wᵀ(C1+C2)w = 1`.
pub fn fit_csp(
    epochs: &EpochSet,
    positive: EventCode,
    n_filters: usize,
) -> Result<SpatialFilterBank, SpatialError> {
    let channels = epochs.n_channels();
    if n_filters == 0 || n_filters % 2 != 0 || n_filters > channels {
        return Err(SpatialError::InvalidFilterCount { requested: n_filters, channels });
    }
    let classes = split_classes(epochs, positive)?;
    let class_cov = |idx: &[usize]| {
        let mut acc = Array2::<f64>::zeros((channels, channels));
        for &i in idx {
            acc += &trace_normalized_cov(epochs.data().index_axis(Axis(0), i));
        }
        acc / idx.len() as f64
    };
    let c1 = class_cov(&classes[0]);
    let c2 = class_cov(&classes[1]);
    let composite = &c1 + &c2;
    if composite.iter().any(|v| !v.is_finite()) {
        return Err(SpatialError::SingularCovariance);
    }
    let eps = 1e-9 * composite.diag().mean().unwrap_or(0.0);
    let mut ridged = composite.clone();
    ridged.diag_mut().mapv_inplace(|v| v + eps);

    let rows = sorted_rows(&to_dmatrix(c1.view()), &to_dmatrix(ridged.view()))?;
    let half = n_filters / 2;
    let picked = rows[..half].iter().chain(&rows[channels - half..]);

    let mut weights = Array2::zeros((n_filters, channels));
    let mut eigenvalues = Vec::with_capacity(n_filters);
    for (k, (_, w)) in picked.enumerate() {
        let norm = quad(w, &composite);
        if !(norm > 0.0) {
            return Err(SpatialError::SingularCovariance);
        }
        let scaled: Vec<f64> = w.iter().map(|x| x / norm.sqrt()).collect();
        eigenvalues.push(quad(&scaled, &c1).clamp(0.0, 1.0));
        weights.row_mut(k).assign(&ndarray::ArrayView1::from(&scaled));
    }
    Ok(SpatialFilterBank {
        weights,
        eigenvalues,
        method: SpatialMethod::Csp,
        trained_on: epochs.channel_labels().to_vec(),
        degenerate: false,
    })
}

/// Fisher spatial filters for ERPs.
///
/// Class means are taken per time sample, so every (trial, sample) pair is a
/// channel-space observation. `Sb = Σ_t Σ_c n_c (μ_c(t) − μ(t))(μ_c(t) − μ(t))ᵀ`
/// and `Sw` is the covariance of the deviations `x_i(t) − μ_c(t)`, shrunk
/// toward a scaled identity. Returns the `n_filters` solutions of
/// `Sb w = λ Sw w` with largest λ, normalized to `wᵀ Sw w = 1`.
pub fn fit_fisher_eigen(
    epochs: &EpochSet,
    positive: EventCode,
    n_filters: usize,
    shrinkage: Shrinkage,
) -> Result<SpatialFilterBank, SpatialError> {
    let (_, channels, samples) = epochs.data().dim();
    if n_filters == 0 || n_filters > channels {
        return Err(SpatialError::InvalidFilterCount { requested: n_filters, channels });
    }
    let classes = split_classes(epochs, positive)?;
    let data = epochs.data();
    let class_mean = |idx: &[usize]| {
        let mut acc = Array2::<f64>::zeros((channels, samples));
        for &i in idx {
            acc += &data.index_axis(Axis(0), i);
        }
        acc / idx.len() as f64
    };
    let means = [class_mean(&classes[0]), class_mean(&classes[1])];
    let n = [classes[0].len() as f64, classes[1].len() as f64];
    let grand = (&means[0] * n[0] + &means[1] * n[1]) / (n[0] + n[1]);

    let observations = (n[0] + n[1]) as usize * samples;
    let mut sb = Array2::<f64>::zeros((channels, channels));
    for c in 0..2 {
        let d = &means[c] - &grand;
        sb = sb + d.dot(&d.t()) * n[c];
    }
    sb /= observations as f64;

    // Deviation observations (trial × sample rows, channel columns).
    let mut dev = Array2::<f64>::zeros((observations, channels));
    let mut row = 0;
    for (c, idx) in classes.iter().enumerate() {
        for &i in idx {
            let trial = data.index_axis(Axis(0), i);
            for t in 0..samples {
                for ch in 0..channels {
                    dev[[row, ch]] = trial[[ch, t]] - means[c][[ch, t]];
                }
                row += 1;
            }
        }
    }
    let (sw, _) = shrunk_covariance(dev.view(), shrinkage)?;
    if sw.diag().sum() <= 0.0 {
        return Err(SpatialError::SingularCovariance);
    }
    let degenerate = sb.diag().sum() <= 1e-12 * sw.diag().sum();

    let rows = sorted_rows(&to_dmatrix(sb.view()), &to_dmatrix(sw.view()))?;
    let mut weights = Array2::zeros((n_filters, channels));
    let mut eigenvalues = Vec::with_capacity(n_filters);
    for (k, (lambda, w)) in rows.iter().take(n_filters).enumerate() {
        weights.row_mut(k).assign(&ndarray::ArrayView1::from(w.as_slice()));
        eigenvalues.push(lambda.max(0.0));
    }
    Ok(SpatialFilterBank {
        weights,
        eigenvalues,
        method: SpatialMethod::FisherEigen,
        trained_on: epochs.channel_labels().to_vec(),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    const T: EventCode = EventCode::Target;
    const D: EventCode = EventCode::Distractor;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("E{i}")).collect()
    }

    fn epoch_set(data: Array3<f64>, codes: Vec<EventCode>) -> EpochSet {
        let (n, c, _) = data.dim();
        EpochSet::new(data, codes, (0..n).map(|i| i * 1000).collect(), 0.0, 100.0, labels(c)).unwrap()
    }

    /// Trials whose channel k is `scale[k]` times an orthonormal sinusoid, so
    /// every trial covariance is exactly diagonal.
    fn diagonal_trials(per_class: usize, a: &[f64], b: &[f64]) -> EpochSet {
        let c = a.len();
        let len = 200;
        let mut data = Array3::zeros((2 * per_class, c, len));
        let mut codes = Vec::new();
        for trial in 0..2 * per_class {
            let scale = if trial < per_class { a } else { b };
            codes.push(if trial < per_class { T } else { D });
            for ch in 0..c {
                for t in 0..len {
                    data[[trial, ch, t]] = scale[ch].sqrt() * (2.0 * PI * (ch + 1) as f64 * t as f64 / len as f64).sin();
                }
            }
        }
        epoch_set(data, codes)
    }

    fn gaussian_trials(per_class: usize, c: usize, len: usize, mix_a: &Array2<f64>, mix_b: &Array2<f64>, seed: u64) -> EpochSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut data = Array3::zeros((2 * per_class, c, len));
        let mut codes = Vec::new();
        for trial in 0..2 * per_class {
            let z = Array2::from_shape_fn((c, len), |_| normal.sample(&mut rng));
            let mix = if trial < per_class { mix_a } else { mix_b };
            data.index_axis_mut(Axis(0), trial).assign(&mix.dot(&z));
            codes.push(if trial < per_class { T } else { D });
        }
        epoch_set(data, codes)
    }

    fn mean_class_cov(ep: &EpochSet, code: EventCode) -> Array2<f64> {
        let idx: Vec<usize> = (0..ep.n_trials()).filter(|&i| ep.labels()[i] == code).collect();
        let mut acc = Array2::zeros((ep.n_channels(), ep.n_channels()));
        for &i in &idx {
            acc += &trace_normalized_cov(ep.data().index_axis(Axis(0), i));
        }
        acc / idx.len() as f64
    }

    #[test]
    fn diagonal_two_channel_example() {
        let ep = diagonal_trials(4, &[4.0, 1.0], &[1.0, 4.0]);
        let bank = fit_csp(&ep, T, 2).unwrap();
        assert_abs_diff_eq!(bank.eigenvalues[0], 0.8, epsilon = 1e-6);
        assert_abs_diff_eq!(bank.eigenvalues[1], 0.2, epsilon = 1e-6);
        let w = &bank.weights;
        assert_abs_diff_eq!(w[[0, 1]] / w[[0, 0]], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(w[[1, 0]] / w[[1, 1]], 0.0, epsilon = 1e-6);
        assert!(w[[0, 0]] > 0.0 && w[[1, 1]] > 0.0);
    }

    fn random_mixes(c: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let a = Array2::from_shape_fn((c, c), |(i, j)| normal.sample(&mut rng) * 0.3 + if i == j { 1.0 + i as f64 } else { 0.0 });
        let b = Array2::from_shape_fn((c, c), |(i, j)| normal.sample(&mut rng) * 0.3 + if i == j { (c - i) as f64 } else { 0.0 });
        (a, b)
    }

    #[test]
    fn whitening_and_pairing() {
        let (a, b) = random_mixes(6, 1);
        let ep = gaussian_trials(20, 6, 100, &a, &b, 2);
        let bank = fit_csp(&ep, T, 6).unwrap();
        let c1 = mean_class_cov(&ep, T);
        let c2 = mean_class_cov(&ep, D);
        let w = &bank.weights;
        let white = w.dot(&(&c1 + &c2)).dot(&w.t());
        for ((i, j), v) in white.indexed_iter() {
            assert_abs_diff_eq!(*v, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-8);
        }
        for k in 0..6 {
            let r = w.row(k).to_vec();
            assert_abs_diff_eq!(quad(&r, &c1) + quad(&r, &c2), 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(quad(&r, &c1), bank.eigenvalues[k], epsilon = 1e-12);
        }
        assert!(bank.eigenvalues.windows(2).all(|p| p[0] >= p[1]));
        assert!(bank.eigenvalues.iter().all(|l| (0.0..=1.0).contains(l)));
    }

    #[test]
    fn picks_extremes() {
        let (a, b) = random_mixes(8, 3);
        let ep = gaussian_trials(20, 8, 100, &a, &b, 4);
        let full = fit_csp(&ep, T, 8).unwrap();
        let four = fit_csp(&ep, T, 4).unwrap();
        assert_eq!(four.weights.dim(), (4, 8));
        for (k, src) in [0, 1, 6, 7].into_iter().enumerate() {
            assert_eq!(four.weights.row(k), full.weights.row(src));
            assert_eq!(four.eigenvalues[k], full.eigenvalues[src]);
        }
    }

    #[test]
    fn same_class_statistics_give_half() {
        let mix = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { 1.0 } else { 0.2 });
        let ep = gaussian_trials(60, 4, 400, &mix, &mix, 5);
        let bank = fit_csp(&ep, T, 4).unwrap();
        for l in &bank.eigenvalues {
            assert!((l - 0.5).abs() <= 0.05, "{l}");
        }
    }

    #[test]
    fn scale_invariant_and_order_independent() {
        let (a, b) = random_mixes(5, 6);
        let ep = gaussian_trials(15, 5, 80, &a, &b, 7);
        let bank = fit_csp(&ep, T, 4).unwrap();
        let scaled = EpochSet::new(
            ep.data() * 37.5,
            ep.labels().to_vec(),
            ep.start_samples().to_vec(),
            0.0,
            100.0,
            ep.channel_labels().to_vec(),
        )
        .unwrap();
        let bank_s = fit_csp(&scaled, T, 4).unwrap();
        for k in 0..4 {
            let u = bank.weights.row(k).to_owned();
            let v = bank_s.weights.row(k).to_owned();
            let u = &u / u.dot(&u).sqrt();
            let v = &v / v.dot(&v).sqrt();
            for (x, y) in u.iter().zip(v.iter()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-6);
            }
        }
        let order: Vec<usize> = (0..ep.n_trials()).rev().collect();
        assert_eq!(fit_csp(&ep.select(&order), T, 4).unwrap(), bank);
    }

    #[test]
    fn csp_variance_ratio_matches_eigenvalue() {
        let a = Array2::from_diag(&ndarray::arr1(&[2.0, 1.0, 1.0]));
        let b = Array2::from_diag(&ndarray::arr1(&[1.0, 1.0, 2.0]));
        let ep = gaussian_trials(80, 3, 250, &a, &b, 8);
        let bank = fit_csp(&ep, T, 2).unwrap();
        let out = apply_filters(&bank, &ep).unwrap();
        let var = |code| {
            let idx: Vec<usize> = (0..out.n_trials()).filter(|&i| out.labels()[i] == code).collect();
            idx.iter().map(|&i| out.data().index_axis(Axis(0), i).row(0).var(0.0)).sum::<f64>() / idx.len() as f64
        };
        let ratio = var(T) / var(D);
        let l = bank.eigenvalues[0];
        let expected = l / (1.0 - l);
        assert!((ratio / expected - 1.0).abs() < 0.1, "{ratio} vs {expected}");
    }

    #[test]
    fn csp_errors() {
        let ep = diagonal_trials(4, &[4.0, 1.0], &[1.0, 4.0]);
        assert!(matches!(fit_csp(&ep, T, 3), Err(SpatialError::InvalidFilterCount { .. })));
        assert!(matches!(fit_csp(&ep, T, 4), Err(SpatialError::InvalidFilterCount { .. })));
        let one_class = ep.select(&[0, 1, 2, 3]);
        assert_eq!(fit_csp(&one_class, T, 2).unwrap_err(), SpatialError::ClassMissing(T));
        let zeros = epoch_set(Array3::zeros((4, 2, 10)), vec![T, T, D, D]);
        assert_eq!(fit_csp(&zeros, T, 2).unwrap_err(), SpatialError::SingularCovariance);
    }

    /// Class means ±(template, 0); noise sign patterns cancel in the class
    /// means and in the channel cross-products.
    fn fisher_toy() -> EpochSet {
        let len = 50;
        let template: Vec<f64> = (0..len).map(|t| (PI * t as f64 / len as f64).sin()).collect();
        let n0: Vec<f64> = (0..len).map(|t| (2.0 * PI * 3.0 * t as f64 / len as f64).cos()).collect();
        let n1: Vec<f64> = (0..len).map(|t| (2.0 * PI * 5.0 * t as f64 / len as f64).sin()).collect();
        let signs = [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
        let mut data = Array3::zeros((8, 2, len));
        let mut codes = Vec::new();
        for trial in 0..8 {
            let class = if trial < 4 { 1.0 } else { -1.0 };
            let (s0, s1) = signs[trial % 4];
            for t in 0..len {
                data[[trial, 0, t]] = class * template[t] + s0 * n0[t];
                data[[trial, 1, t]] = s1 * n1[t];
            }
            codes.push(if trial < 4 { T } else { D });
        }
        epoch_set(data, codes)
    }

    #[test]
    fn fisher_toy_direction() {
        let bank = fit_fisher_eigen(&fisher_toy(), T, 2, Shrinkage::Auto).unwrap();
        let w = bank.weights.row(0);
        assert!(w[0] > 0.0);
        assert_abs_diff_eq!(w[1] / w[0], 0.0, epsilon = 1e-6);
        assert!(bank.eigenvalues[0] > 0.1);
        assert_abs_diff_eq!(bank.eigenvalues[1], 0.0, epsilon = 1e-9);
        assert!(!bank.degenerate);
    }

    #[test]
    fn fisher_equal_means_is_degenerate() {
        let mix = Array2::eye(3);
        let mut ep = gaussian_trials(6, 3, 40, &mix, &mix, 9);
        // Give both classes the same mean by mirroring trials across classes.
        let mirrored: Vec<usize> = (0..6).chain(0..6).collect();
        let data = ep.data().select(Axis(0), &mirrored);
        ep = epoch_set(data, [vec![T; 6], vec![D; 6]].concat());
        let bank = fit_fisher_eigen(&ep, T, 2, Shrinkage::Auto).unwrap();
        assert!(bank.degenerate);
        assert!(bank.eigenvalues.iter().all(|l| l.abs() < 1e-12));
        assert_eq!(bank.weights.dim(), (2, 3));
    }

    #[test]
    fn pipeline_shapes() {
        let (a, b) = random_mixes(16, 10);
        let ep = gaussian_trials(12, 16, 64, &a, &b, 11);
        assert_eq!(fit_csp(&ep, T, 6).unwrap().weights.dim(), (6, 16));
        assert_eq!(fit_fisher_eigen(&ep, T, 5, Shrinkage::Auto).unwrap().weights.dim(), (5, 16));
    }

    #[test]
    fn apply_identity_and_common_mode() {
        let ep = fisher_toy();
        let ident = SpatialFilterBank {
            weights: Array2::eye(2),
            eigenvalues: vec![1.0, 1.0],
            method: SpatialMethod::Csp,
            trained_on: labels(2),
            degenerate: false,
        };
        assert_eq!(apply_filters(&ident, &ep).unwrap().data(), ep.data());

        let dup = Array3::from_shape_fn((2, 2, 30), |(i, _, t)| (t as f64 * 0.3 + i as f64).sin());
        let dup = epoch_set(dup, vec![T, D]);
        let diff = SpatialFilterBank {
            weights: ndarray::arr2(&[[1.0, -1.0]]) / 2f64.sqrt(),
            ..ident.clone()
        };
        let out = apply_filters(&diff, &dup).unwrap();
        assert_eq!(out.n_channels(), 1);
        assert!(out.data().iter().all(|v| v.abs() < 1e-15));

        let rec = Recording::new(100.0, labels(2), Array2::from_elem((2, 10), 3.0), 0.0).unwrap();
        let r = apply_filters(&diff, &rec).unwrap();
        assert_eq!(r.n_samples(), 10);
        assert_eq!(r.channel_labels(), &["csp1".to_string()]);

        let wrong = Recording::new(100.0, vec!["Cz".into(), "Pz".into()], Array2::zeros((2, 10)), 0.0).unwrap();
        assert!(matches!(apply_filters(&diff, &wrong), Err(SpatialError::ChannelMismatch { .. })));
    }

    #[test]
    fn bank_json_round_trip() {
        let bank = fit_csp(&diagonal_trials(4, &[4.0, 1.0], &[1.0, 4.0]), T, 2).unwrap();
        let json = serde_json::to_string(&bank).unwrap();
        assert!(json.contains("\"weights\":[["));
        let back: SpatialFilterBank = serde_json::from_str(&json).unwrap();
        assert_eq!(back, bank);
    }
}
