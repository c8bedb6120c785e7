//! The two classification chains: ERP features for the oddball task and
//! spatially filtered band powers for the n-back task. Spatial filters are
//! fitted inside each training fold.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{cross_validate, fit_slda, ClassifyError, CvResult, Shrinkage};
use crate::dsp::{
    bandpass, bandpower_features, decimate, epochize, prune_overlaps, BandDefinition, DspError,
    EpochSet,
};
use crate::recording::{EventCode, EventList, Recording};
use crate::spatial::{apply_filters, fit_csp, fit_fisher_eigen, SpatialError};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// Rate the ERP chain decimates to when no factor is given.
pub const ERP_TARGET_RATE_HZ: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct P300Params {
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    /// Decimation factor; `None` picks `round(rate / 16)` (32 at 512 Hz,
    /// 8 at 125 Hz).
    pub decimation: Option<usize>,
    pub epoch_s: f64,
    pub n_filters: usize,
    pub shrinkage: Shrinkage,
    pub prune: bool,
    pub folds: usize,
    pub repeats: usize,
}

impl Default for P300Params {
    fn default() -> Self {
        Self {
            band_lo_hz: 0.5,
            band_hi_hz: 40.0,
            decimation: None,
            epoch_s: 1.0,
            n_filters: 5,
            shrinkage: Shrinkage::Auto,
            prune: true,
            folds: 4,
            repeats: 10,
        }
    }
}

impl P300Params {
    pub fn decimation_for(&self, rate_hz: f64) -> usize {
        self.decimation
            .unwrap_or_else(|| ((rate_hz / ERP_TARGET_RATE_HZ).round() as usize).max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSet {
    /// δ, θ, α, β, γ.
    Five,
    /// δ, θ, α.
    Three,
}

impl BandSet {
    pub fn bands(self) -> Vec<BandDefinition> {
        match self {
            BandSet::Five => BandDefinition::five_bands(),
            BandSet::Three => BandDefinition::three_bands(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BandSet::Five => "workload_5b",
            BandSet::Three => "workload_3b",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadParams {
    pub trial_s: f64,
    /// Broadband pre-filter applied before CSP.
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub bands: BandSet,
    pub n_filters: usize,
    pub folds: usize,
    pub repeats: usize,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            trial_s: 2.0,
            band_lo_hz: 1.0,
            band_hi_hz: 40.0,
            bands: BandSet::Five,
            n_filters: 6,
            folds: 4,
            repeats: 10,
        }
    }
}

fn binary_labels(epochs: &EpochSet, positive: EventCode) -> Vec<bool> {
    epochs.labels().iter().map(|&c| c == positive).collect()
}

/// Band-pass, decimate, epoch `[0, epoch_s)` after every flash and drop
/// overlapping windows.
pub fn p300_epochs(rec: &Recording, events: &EventList, params: &P300Params) -> Result<EpochSet, PipelineError> {
    let filtered = bandpass(rec, params.band_lo_hz, params.band_hi_hz)?;
    let q = params.decimation_for(rec.sample_rate_hz());
    let low = decimate(&filtered, q)?;
    let epochs = epochize(&low, events, &[EventCode::Target, EventCode::Distractor], 0.0, params.epoch_s)?;
    Ok(if params.prune { prune_overlaps(&epochs) } else { epochs })
}

fn flatten(epochs: &EpochSet) -> Array2<f64> {
    let (n, c, t) = epochs.data().dim();
    epochs
        .data()
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((n, c * t))
        .expect("contiguous tensor")
}

/// Cross-validated AUROCC of the ERP chain. Fisher filters and the sLDA are
/// refitted on each training fold.
pub fn p300_crossval(
    rec: &Recording,
    events: &EventList,
    params: &P300Params,
    seed: u64,
) -> Result<CvResult, PipelineError> {
    let epochs = p300_epochs(rec, events, params)?;
    p300_crossval_epochs(&epochs, params, seed)
}

pub fn p300_crossval_epochs(epochs: &EpochSet, params: &P300Params, seed: u64) -> Result<CvResult, PipelineError> {
    let labels = binary_labels(epochs, EventCode::Target);
    cross_validate(&labels, params.folds, params.repeats, seed, |train, test| {
        let tr = epochs.select(train);
        let bank = fit_fisher_eigen(&tr, EventCode::Target, params.n_filters, params.shrinkage)?;
        let x_train = flatten(&apply_filters(&bank, &tr)?);
        let x_test = flatten(&apply_filters(&bank, &epochs.select(test))?);
        let y: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
        let model = fit_slda(x_train.view(), &y)?;
        Ok::<_, PipelineError>(model.scores(x_test.view()).to_vec())
    })
}

/// Pre-filter and cut one window per condition event.
pub fn workload_epochs(rec: &Recording, events: &EventList, params: &WorkloadParams) -> Result<EpochSet, PipelineError> {
    let filtered = bandpass(rec, params.band_lo_hz, params.band_hi_hz)?;
    Ok(epochize(
        &filtered,
        events,
        &[EventCode::Cond0Back, EventCode::Cond2Back],
        0.0,
        params.trial_s,
    )?)
}

/// Cross-validated AUROCC of the band-power chain (2-back is the positive
/// class). CSP and the sLDA are refitted on each training fold.
pub fn workload_crossval(
    rec: &Recording,
    events: &EventList,
    params: &WorkloadParams,
    seed: u64,
) -> Result<CvResult, PipelineError> {
    let epochs = workload_epochs(rec, events, params)?;
    workload_crossval_epochs(&epochs, params, seed)
}

pub fn workload_crossval_epochs(
    epochs: &EpochSet,
    params: &WorkloadParams,
    seed: u64,
) -> Result<CvResult, PipelineError> {
    let labels = binary_labels(epochs, EventCode::Cond2Back);
    let bands = params.bands.bands();
    cross_validate(&labels, params.folds, params.repeats, seed, |train, test| {
        let tr = epochs.select(train);
        let bank = fit_csp(&tr, EventCode::Cond2Back, params.n_filters)?;
        let x_train = bandpower_features(&apply_filters(&bank, &tr)?, &bands)?;
        let x_test = bandpower_features(&apply_filters(&bank, &epochs.select(test))?, &bands)?;
        let y: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
        let model = fit_slda(x_train.view(), &y)?;
        Ok::<_, PipelineError>(model.scores(x_test.view()).to_vec())
    })
}

/// Number of features the workload chain feeds to the classifier.
pub fn workload_feature_count(params: &WorkloadParams) -> usize {
    params.n_filters * params.bands.bands().len()
}
