use super::ranks::{doubled_midranks, tie_term};
use super::{normal_two_sided, MethodChoice, PValueMethod, StatTestResult, StatsError};

/// Largest number of non-zero differences evaluated exactly under
/// [`MethodChoice::Auto`].
pub const WILCOXON_EXACT_MAX_N: usize = 20;

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped before ranking. The statistic is
/// `min(W+, W-)`. When every difference is zero the result has
/// `n_effective = 0`, `p_value = 1` and method `ExactEnumeration`.
pub fn wilcoxon_signed_rank(pre: &[f64], post: &[f64]) -> Result<StatTestResult, StatsError> {
    wilcoxon_signed_rank_with(pre, post, MethodChoice::Auto)
}

pub fn wilcoxon_signed_rank_with(
    pre: &[f64],
    post: &[f64],
    choice: MethodChoice,
) -> Result<StatTestResult, StatsError> {
    if pre.len() != post.len() {
        return Err(StatsError::LengthMismatch {
            pre: pre.len(),
            post: post.len(),
        });
    }
    if pre.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if pre.iter().chain(post).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let diffs: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(StatTestResult {
            statistic: 0.0,
            p_value: 1.0,
            method: PValueMethod::ExactEnumeration,
            n_effective: 0,
        });
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = doubled_midranks(&magnitudes);
    let total: u64 = ranks.iter().sum();
    let plus: u64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let w_doubled = plus.min(total - plus);
    let statistic = w_doubled as f64 / 2.0;

    let exact = match choice {
        MethodChoice::Auto => n <= WILCOXON_EXACT_MAX_N,
        MethodChoice::Exact => true,
        MethodChoice::Normal => false,
    };
    let (p_value, method) = if exact {
        (exact_p(&ranks, total, w_doubled), PValueMethod::ExactEnumeration)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
        (
            normal_two_sided(statistic - mean, var),
            PValueMethod::NormalApproximation,
        )
    };
    Ok(StatTestResult {
        statistic,
        p_value,
        method,
        n_effective: n,
    })
}

/// Exact two-sided p from the null distribution of the doubled W+ over all
/// 2^n sign assignments, built by counting subset sums of the doubled ranks.
fn exact_p(ranks: &[u64], total: u64, w_doubled: u64) -> f64 {
    if 2 * w_doubled >= total {
        return 1.0;
    }
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let lower: u64 = counts[..=w_doubled as usize].iter().sum();
    let upper: u64 = counts[(total - w_doubled) as usize..].iter().sum();
    let all = 2f64.powi(ranks.len() as i32);
    ((lower + upper) as f64 / all).min(1.0)
}
