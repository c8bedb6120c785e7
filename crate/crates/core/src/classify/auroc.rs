use super::{class_counts, ClassifyError};

/// Area under the ROC curve: P(s₁ > s₀) + ½·P(s₁ = s₀) over cross-class pairs,
/// via the mid-rank sum. `true` labels are the positive class.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, ClassifyError> {
    if scores.len() != labels.len() {
        return Err(ClassifyError::ShapeMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(ClassifyError::DegenerateInput("NaN score".into()));
    }
    let (n0, n1) = class_counts(labels);
    if n0 == 0 {
        return Err(ClassifyError::ClassMissing(false));
    }
    if n1 == 0 {
        return Err(ClassifyError::ClassMissing(true));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the positive-class rank sum, kept integral: a tie group spanning
    // sorted positions i..j (0-based, inclusive) has doubled mid-rank i + j + 2.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let positives = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += positives * (i + j + 2) as u128;
        i = j + 1;
    }
    let (n0, n1) = (n0 as u128, n1 as u128);
    let twice_u = twice_rank_sum - n1 * (n1 + 1);
    Ok(twice_u as f64 / (2 * n0 * n1) as f64)
}
