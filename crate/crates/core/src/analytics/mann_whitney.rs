use super::ranks::{doubled_midranks, tie_term};
use super::{normal_two_sided, MethodChoice, PValueMethod, StatTestResult, StatsError};

/// Largest combined sample size evaluated exactly under [`MethodChoice::Auto`].
pub const MW_EXACT_MAX_TOTAL: usize = 14;

/// Two-sided Mann-Whitney U test for independent samples.
///
/// The statistic is `min(U_a, U_b)` from midrank sums.
pub fn mann_whitney_u(group_a: &[f64], group_b: &[f64]) -> Result<StatTestResult, StatsError> {
    mann_whitney_u_with(group_a, group_b, MethodChoice::Auto)
}

pub fn mann_whitney_u_with(
    group_a: &[f64],
    group_b: &[f64],
    choice: MethodChoice,
) -> Result<StatTestResult, StatsError> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if group_a.iter().chain(group_b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (n, m) = (group_a.len(), group_b.len());
    let pooled: Vec<f64> = group_a.iter().chain(group_b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let rank_sum_a: u64 = ranks[..n].iter().sum();
    let nm2 = 2 * (n * m) as u64;
    let offset = (n * (n + 1)) as u64;
    let u_a = rank_sum_a - offset;
    let u_doubled = u_a.min(nm2 - u_a);
    let statistic = u_doubled as f64 / 2.0;

    let total = n + m;
    let exact = match choice {
        MethodChoice::Auto => total <= MW_EXACT_MAX_TOTAL,
        MethodChoice::Exact => true,
        MethodChoice::Normal => false,
    };
    let (p_value, method) = if exact {
        (
            exact_p(&ranks, n, offset, nm2, u_doubled),
            PValueMethod::ExactEnumeration,
        )
    } else {
        let (nf, mf, tf) = (n as f64, m as f64, total as f64);
        let var = nf * mf / 12.0 * ((tf + 1.0) - tie_term(&ties) / (tf * (tf - 1.0)));
        (
            normal_two_sided(statistic - nf * mf / 2.0, var),
            PValueMethod::NormalApproximation,
        )
    };
    Ok(StatTestResult {
        statistic,
        p_value,
        method,
        n_effective: total,
    })
}

/// Exact two-sided p over all C(n+m, n) ways of choosing group A's ranks,
/// counted by a (subset size, doubled rank sum) table.
fn exact_p(ranks: &[u64], n: usize, offset: u64, nm2: u64, u_doubled: u64) -> f64 {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // counts[k * width + s]: subsets of size k with doubled rank sum s
    let mut counts = vec![0f64; (n + 1) * width];
    counts[0] = 1.0;
    for (seen, &r) in ranks.iter().enumerate() {
        let r = r as usize;
        for k in (0..=seen.min(n - 1)).rev() {
            for s in 0..width - r {
                let c = counts[k * width + s];
                if c != 0.0 {
                    counts[(k + 1) * width + s + r] += c;
                }
            }
        }
    }
    let row = &counts[n * width..];
    let mut extreme = 0.0;
    let mut all = 0.0;
    for (s, &c) in row.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        all += c;
        let u = s as u64 - offset;
        if u.min(nm2 - u) <= u_doubled {
            extreme += c;
        }
    }
    (extreme / all).min(1.0)
}
