//! Statistics for pre/post Likert self-efficacy questionnaires.
//!
//! Paired pre/post answers are compared per question with the Wilcoxon
//! signed-rank test and Bonferroni-adjusted for the seven questions.
//! Demographic segments are compared with the Mann-Whitney U test on
//! per-participant mean scores.
//!
//! Both tests use midranks for ties and report two-sided p-values. Small
//! samples get exact p-values from the full permutation distribution; larger
//! ones use the tie-corrected normal approximation with continuity
//! correction. [`StatTestResult::method`] records which one ran.

mod dataset;
mod mann_whitney;
mod ranks;
mod report;
mod wilcoxon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{DatasetError, LikertResponse, Phase, QuestionnaireDataset, QUESTION_COUNT, QUESTION_LABELS};
pub use mann_whitney::{mann_whitney_u, mann_whitney_u_with, MW_EXACT_MAX_TOTAL};
pub use ranks::midranks;
pub use report::{
    summarize, QuestionRow, Report, SegmentComparison, Segmentation, BONFERRONI_FAMILY, SIGNIFICANCE_LEVEL,
};
pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_with, WILCOXON_EXACT_MAX_N};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("paired samples differ in length ({pre} vs {post})")]
    LengthMismatch { pre: usize, post: usize },
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("p-value {0} outside [0, 1]")]
    PValueOutOfRange(f64),
    #[error("family size {m} smaller than number of p-values {len}")]
    FamilyTooSmall { m: usize, len: usize },
    #[error("no paired data: no participant has both a pre and a post response")]
    NoPairedData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    ExactEnumeration,
    NormalApproximation,
}

/// Which p-value computation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodChoice {
    /// Exact below the size cutoff, normal approximation above it.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: PValueMethod,
    /// Pairs left after dropping zero differences, or the combined group size.
    pub n_effective: usize,
}

/// Bonferroni adjustment: `min(1, p * m)` for each p-value.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>, StatsError> {
    if m < p_values.len() {
        return Err(StatsError::FamilyTooSmall { m, len: p_values.len() });
    }
    p_values
        .iter()
        .map(|&p| {
            if (0.0..=1.0).contains(&p) {
                Ok((p * m as f64).min(1.0))
            } else {
                Err(StatsError::PValueOutOfRange(p))
            }
        })
        .collect()
}

/// `p < alpha` for each p-value.
pub fn significance_flags(p_values: &[f64], alpha: f64) -> Vec<bool> {
    p_values.iter().map(|&p| p < alpha).collect()
}

/// Two-sided normal tail probability for a continuity-corrected deviation.
fn normal_two_sided(deviation: f64, variance: f64) -> f64 {
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((deviation.abs() - 0.5).max(0.0)) / variance.sqrt();
    statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_examples() {
        let adj = bonferroni(&[0.004], 7).unwrap();
        assert!((adj[0] - 0.028).abs() < 1e-15);
        assert_eq!(bonferroni(&[0.5], 7).unwrap(), vec![1.0]);
        assert!(bonferroni(&[1.2], 7).is_err());
        assert!(bonferroni(&[-0.1], 7).is_err());
        assert!(bonferroni(&[0.1, 0.2], 1).is_err());
    }

    #[test]
    fn flags_at_alpha() {
        let adjusted = [0.085, 0.036, 0.045, 0.024, 0.073, 0.003, 0.080];
        let flags = significance_flags(&adjusted, 0.05);
        assert_eq!(flags, vec![false, true, true, true, false, true, false]);
        assert_eq!(significance_flags(&[0.05], 0.05), vec![false]);
    }

    #[test]
    fn normal_tail_sanity() {
        // deviation exactly at the continuity correction gives p = 1
        assert_eq!(normal_two_sided(0.5, 4.0), 1.0);
        // z = 1.96 -> about 0.05
        let p = normal_two_sided(1.96 + 0.5, 1.0);
        assert!((p - 0.05).abs() < 1e-3, "{p}");
        assert_eq!(normal_two_sided(3.0, 0.0), 1.0);
    }
}
