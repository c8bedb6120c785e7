use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auroc::auroc;
use super::lda::fit_slda;
use super::{class_counts, ClassifyError};

/// AUROCC per cross-validation repeat.
///
/// `per_repeat_auroc` averages the per-fold AUROCCs of each repeat; the pooled
/// variant scores all held-out trials of a repeat together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub per_repeat_auroc: Vec<f64>,
    pub per_repeat_pooled_auroc: Vec<f64>,
    pub fold_count: usize,
    pub seed: u64,
}

impl CvResult {
    pub fn repeats(&self) -> usize {
        self.per_repeat_auroc.len()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.per_repeat_auroc)
    }

    /// Sample standard deviation (n − 1) of the fold-averaged values.
    pub fn sd(&self) -> f64 {
        sample_sd(&self.per_repeat_auroc)
    }

    pub fn pooled_mean(&self) -> f64 {
        mean(&self.per_repeat_pooled_auroc)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Fold index for every trial. Each class is shuffled independently and dealt
/// round-robin, continuing the deal from one class to the next, so fold sizes
/// differ by at most one overall and per class.
pub fn stratified_folds(labels: &[bool], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for class in [false, true] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        for i in members {
            folds[i] = next % k;
            next += 1;
        }
    }
    folds
}

/// Repeated stratified k-fold cross-validation.
///
/// `fit_score(train, test)` trains on the `train` trial indices and returns
/// one score per `test` index, higher meaning more likely `true`. Fold
/// assignments for repeat `r` come from ChaCha8 seeded with `seed` on stream
/// `r`, so results do not depend on thread scheduling.
pub fn cross_validate<F, E>(
    labels: &[bool],
    k: usize,
    repeats: usize,
    seed: u64,
    fit_score: F,
) -> Result<CvResult, E>
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<f64>, E> + Sync,
    E: From<ClassifyError> + Send,
{
    if k < 2 {
        return Err(ClassifyError::DegenerateInput(format!("k = {k}")).into());
    }
    let (n0, n1) = class_counts(labels);
    for (class, count) in [(false, n0), (true, n1)] {
        if count < k {
            return Err(ClassifyError::TooFewTrials { class, count, needed: k }.into());
        }
    }

    let assignments: Vec<Vec<usize>> = (0..repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            stratified_folds(labels, k, &mut rng)
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..repeats).flat_map(|r| (0..k).map(move |f| (r, f))).collect();
    let fold_scores: Vec<(Vec<usize>, Vec<f64>)> = jobs
        .par_iter()
        .map(|&(r, f)| {
            let folds = &assignments[r];
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| folds[i] == f);
            let scores = fit_score(&train, &test)?;
            if scores.len() != test.len() {
                return Err(ClassifyError::ShapeMismatch(format!(
                    "{} scores for {} test trials",
                    scores.len(),
                    test.len()
                ))
                .into());
            }
            Ok((test, scores))
        })
        .collect::<Result<_, E>>()?;

    let mut per_repeat = Vec::with_capacity(repeats);
    let mut pooled = Vec::with_capacity(repeats);
    for chunk in fold_scores.chunks(k) {
        let mut fold_sum = 0.0;
        let mut all_scores = Vec::with_capacity(labels.len());
        let mut all_labels = Vec::with_capacity(labels.len());
        for (test, scores) in chunk {
            let l: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
            fold_sum += auroc(scores, &l)?;
            all_scores.extend_from_slice(scores);
            all_labels.extend(l);
        }
        per_repeat.push(fold_sum / k as f64);
        pooled.push(auroc(&all_scores, &all_labels)?);
    }
    Ok(CvResult {
        per_repeat_auroc: per_repeat,
        per_repeat_pooled_auroc: pooled,
        fold_count: k,
        seed,
    })
}

/// Cross-validated shrinkage-LDA AUROCC on a fixed feature matrix.
pub fn crossval_auroc(
    features: ArrayView2<'_, f64>,
    labels: &[bool],
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<CvResult, ClassifyError> {
    if features.nrows() != labels.len() {
        return Err(ClassifyError::ShapeMismatch(format!(
            "{} rows for {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    cross_validate(labels, k, repeats, seed, |train, test| {
        let train_labels: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
        let model = fit_slda(features.select(Axis(0), train).view(), &train_labels)?;
        Ok(model.scores(features.select(Axis(0), test).view()).to_vec())
    })
}
