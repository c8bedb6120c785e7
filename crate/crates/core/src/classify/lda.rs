use nalgebra::DVector;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::shrinkage::{shrunk_covariance, Shrinkage};
use super::{class_counts, ClassifyError};
use crate::linalg::{solve_spd, to_dmatrix};

/// Two-class linear discriminant. Positive scores favour the `true` class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub w: Array1<f64>,
    pub b: f64,
    pub lambda: f64,
    /// Means of the `false` and `true` classes.
    pub class_means: [Array1<f64>; 2],
}

impl LdaModel {
    pub fn score(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.w.dot(&x) + self.b
    }

    /// Scores every row of `x`.
    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.dot(&self.w) + self.b
    }
}

/// Shrinkage LDA with the Ledoit-Wolf intensity.
pub fn fit_slda(features: ArrayView2<'_, f64>, labels: &[bool]) -> Result<LdaModel, ClassifyError> {
    fit_slda_with(features, labels, Shrinkage::Auto)
}

/// Shrinkage LDA on the pooled within-class covariance.
///
/// `w` solves `Σ w = μ₁ − μ₀`. If the within-class scatter vanishes entirely
/// the covariance is replaced by the identity.
pub fn fit_slda_with(
    features: ArrayView2<'_, f64>,
    labels: &[bool],
    shrinkage: Shrinkage,
) -> Result<LdaModel, ClassifyError> {
    let (n, p) = features.dim();
    if labels.len() != n {
        return Err(ClassifyError::ShapeMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    let (n0, n1) = class_counts(labels);
    for (class, count) in [(false, n0), (true, n1)] {
        if count == 0 {
            return Err(ClassifyError::ClassMissing(class));
        }
        if count < 2 {
            return Err(ClassifyError::DegenerateInput(format!(
                "class {class} has a single trial"
            )));
        }
    }

    let idx0: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
    let idx1: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
    let mu0 = features.select(Axis(0), &idx0).mean_axis(Axis(0)).expect("non-empty");
    let mu1 = features.select(Axis(0), &idx1).mean_axis(Axis(0)).expect("non-empty");

    let mut deviations = features.to_owned();
    for (mut row, &l) in deviations.rows_mut().into_iter().zip(labels) {
        row -= if l { &mu1 } else { &mu0 };
    }
    let (mut sigma, lambda) = shrunk_covariance(deviations.view(), shrinkage)?;
    if sigma.diag().sum() == 0.0 {
        sigma = Array2::eye(p);
    }

    let diff = &mu1 - &mu0;
    let w = solve(&sigma, &diff)?;
    let b = -w.dot(&(&mu0 + &mu1)) / 2.0;
    if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(ClassifyError::DegenerateInput("non-finite discriminant".into()));
    }
    Ok(LdaModel {
        w,
        b,
        lambda,
        class_means: [mu0, mu1],
    })
}

fn solve(sigma: &Array2<f64>, rhs: &Array1<f64>) -> Result<Array1<f64>, ClassifyError> {
    let a = to_dmatrix(sigma.view());
    let b = DVector::from_iterator(rhs.len(), rhs.iter().copied());
    let x = solve_spd(&a, &b).or_else(|_| {
        // λ = 0 on rank-deficient data: retry with a ridge at the noise floor.
        let nu = sigma.diag().sum() / sigma.nrows() as f64;
        let mut ridged = a.clone();
        for i in 0..ridged.nrows() {
            ridged[(i, i)] += 1e-10 * nu;
        }
        solve_spd(&ridged, &b)
    });
    let x = x.map_err(|_| ClassifyError::DegenerateInput("covariance not positive definite".into()))?;
    Ok(Array1::from_iter(x.iter().copied()))
}
