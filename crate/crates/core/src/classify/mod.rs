//! Shrinkage LDA, AUROCC scoring, repeated stratified cross-validation and the
//! Wilcoxon signed-rank test used to compare amplifiers.

mod auroc;
mod crossval;
mod lda;
mod shrinkage;
mod wilcoxon;

use thiserror::Error;

pub use auroc::auroc;
pub use crossval::{cross_validate, crossval_auroc, stratified_folds, CvResult};
pub(crate) use crossval::sample_sd;
pub use lda::{fit_slda, fit_slda_with, LdaModel};
pub use shrinkage::{ledoit_wolf, shrunk_covariance, Shrinkage};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_MAX_N};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("class {0} has no trials")]
    ClassMissing(bool),
    #[error("class {class} has {count} trials, need at least {needed}")]
    TooFewTrials {
        class: bool,
        count: usize,
        needed: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Counts of (false, true) labels.
pub(crate) fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (labels.len() - pos, pos)
}
