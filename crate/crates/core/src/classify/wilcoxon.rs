use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest number of nonzero differences for which the exact null
/// distribution is enumerated.
pub const EXACT_MAX_N: usize = 25;

/// Differences (and gaps between |differences|) below this fraction of the
/// operands' magnitude count as zero. Table values such as 0.84 − 0.80 and
/// 0.91 − 0.87 differ in the last bits and must still tie.
const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of mid-ranks of positive differences `a − b`.
    pub w_plus: f64,
    pub w_minus: f64,
    /// Nonzero differences used.
    pub n: usize,
    pub n_zero: usize,
    pub p_two_sided: f64,
    pub method: WilcoxonMethod,
    /// Every difference was zero; `p_two_sided` is 1.
    pub all_zero: bool,
}

/// Two-sided Wilcoxon signed-rank test on `a − b`.
///
/// Zero differences are discarded and tied magnitudes share mid-ranks. For up
/// to [`EXACT_MAX_N`] differences the p-value counts all 2ⁿ sign assignments
/// of the observed ranks; above that a tie-corrected normal approximation
/// with continuity correction is used.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> WilcoxonResult {
    let mut diffs = Vec::with_capacity(pairs.len());
    let mut n_zero = 0;
    for &(a, b) in pairs {
        let d = a - b;
        if d.abs() <= REL_TOL * a.abs().max(b.abs()) {
            n_zero += 1;
        } else {
            diffs.push(d);
        }
    }
    let n = diffs.len();
    if n == 0 {
        return WilcoxonResult {
            w_plus: 0.0,
            w_minus: 0.0,
            n: 0,
            n_zero,
            p_two_sided: 1.0,
            method: WilcoxonMethod::Exact,
            all_zero: true,
        };
    }

    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    // Doubled mid-ranks stay integral.
    let mut twice_ranks = vec![0u64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() - diffs[i].abs() <= REL_TOL * diffs[j + 1].abs() {
            j += 1;
        }
        for r in &mut twice_ranks[i..=j] {
            *r = (i + j + 2) as u64;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }

    let twice_w_plus: u64 = diffs
        .iter()
        .zip(&twice_ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let twice_total: u64 = twice_ranks.iter().sum();
    let w_plus = twice_w_plus as f64 / 2.0;
    let w_minus = (twice_total - twice_w_plus) as f64 / 2.0;

    let (p, method) = if n <= EXACT_MAX_N {
        (exact_p(&twice_ranks, twice_w_plus), WilcoxonMethod::Exact)
    } else {
        (normal_p(n, &tie_sizes, w_plus), WilcoxonMethod::Normal)
    };
    WilcoxonResult {
        w_plus,
        w_minus,
        n,
        n_zero,
        p_two_sided: p,
        method,
        all_zero: false,
    }
}

fn exact_p(twice_ranks: &[u64], observed: u64) -> f64 {
    let total: u64 = twice_ranks.iter().sum();
    // counts[s] = number of sign assignments whose positive ranks sum to s.
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in twice_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let observed = observed as usize;
    let lower: u64 = counts[..=observed].iter().sum();
    let upper: u64 = counts[observed..].iter().sum();
    let all = (1u64 << twice_ranks.len()) as f64;
    (2.0 * lower.min(upper) as f64 / all).min(1.0)
}

fn normal_p(n: usize, tie_sizes: &[usize], w_plus: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let dev = w_plus - mean;
    let corrected = (dev.abs() - 0.5).max(0.0);
    let z = corrected / var.sqrt();
    let normal = Normal::standard();
    (2.0 * normal.sf(z)).min(1.0)
}
