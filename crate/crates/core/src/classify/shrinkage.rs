//! Ledoit-Wolf shrinkage toward a scaled identity.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::ClassifyError;

/// Shrinkage intensity: the analytic Ledoit-Wolf estimate or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Shrinkage {
    #[default]
    Auto,
    Fixed(f64),
}

/// Ledoit-Wolf estimate for the rows of `x` (n samples × p variables).
///
/// Returns `(1 − λ)·S + λ·ν·I` and λ, where `S` is the 1/n sample covariance
/// and `ν = tr(S)/p`. When `S` is zero the target coincides with it and λ is
/// reported as 1.
pub fn ledoit_wolf(x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, f64), ClassifyError> {
    shrunk_covariance(x, Shrinkage::Auto)
}

pub fn shrunk_covariance(
    x: ArrayView2<'_, f64>,
    shrinkage: Shrinkage,
) -> Result<(Array2<f64>, f64), ClassifyError> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(ClassifyError::DegenerateInput(format!("{n} samples")));
    }
    if p == 0 {
        return Err(ClassifyError::DegenerateInput("zero variables".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ClassifyError::DegenerateInput("non-finite sample".into()));
    }
    if let Shrinkage::Fixed(l) = shrinkage {
        if !(0.0..=1.0).contains(&l) {
            return Err(ClassifyError::DegenerateInput(format!("shrinkage {l}")));
        }
    }

    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let xc = &x - &mean;
    let s = xc.t().dot(&xc) / n as f64;
    let nu = s.diag().sum() / p as f64;

    let lambda = match shrinkage {
        Shrinkage::Fixed(l) => l,
        Shrinkage::Auto => {
            let mut target_dist = 0.0;
            for ((i, j), v) in s.indexed_iter() {
                let t = if i == j { nu } else { 0.0 };
                target_dist += (v - t) * (v - t);
            }
            if target_dist == 0.0 {
                1.0
            } else {
                // Σ_k ‖x_k x_kᵀ − S‖² = Σ_k (‖x_k‖⁴ − 2 x_kᵀ S x_k) + n‖S‖².
                let s_norm2: f64 = s.iter().map(|v| v * v).sum();
                let mut spread = n as f64 * s_norm2;
                for row in xc.rows() {
                    let r2 = row.dot(&row);
                    spread += r2 * r2 - 2.0 * row.dot(&s.dot(&row));
                }
                let b2 = (spread / (n * n) as f64).max(0.0);
                (b2 / target_dist).clamp(0.0, 1.0)
            }
        }
    };

    let mut sigma = s * (1.0 - lambda);
    for i in 0..p {
        sigma[[i, i]] += lambda * nu;
    }
    Ok((sigma, lambda))
}
