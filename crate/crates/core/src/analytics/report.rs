use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::dataset::{Phase, QuestionnaireDataset, QUESTION_COUNT};
use super::{
    bonferroni, mann_whitney_u, significance_flags, wilcoxon_signed_rank, PValueMethod, StatTestResult, StatsError,
};

/// Family size for the Bonferroni correction (one test per question).
pub const BONFERRONI_FAMILY: usize = QUESTION_COUNT;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRow {
    pub label: String,
    pub pre_mean: f64,
    pub pre_median: f64,
    pub post_mean: f64,
    pub post_median: f64,
    pub test: StatTestResult,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentComparison {
    pub phase: Phase,
    pub segment_a: String,
    pub segment_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub median_a: f64,
    pub median_b: f64,
    pub test: StatTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Segmentation {
    Compared { comparisons: Vec<SegmentComparison> },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<QuestionRow>,
    pub n_paired: usize,
    /// Participants without both phases, excluded from the paired tests.
    pub excluded: Vec<String>,
    pub segmentation: Segmentation,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

/// Per-question pre/post summary with Bonferroni-adjusted Wilcoxon p-values,
/// plus a Mann-Whitney comparison of per-participant mean scores between
/// two segments for each phase.
///
/// Means, medians and tests use paired participants only; the others are
/// listed in [`Report::excluded`].
pub fn summarize(dataset: &QuestionnaireDataset) -> Result<Report, StatsError> {
    let (pairs, excluded) = dataset.paired();
    if pairs.is_empty() {
        return Err(StatsError::NoPairedData);
    }
    if !excluded.is_empty() {
        log::warn!(
            "{} participant(s) without both phases excluded from paired tests",
            excluded.len()
        );
    }

    let mut rows = Vec::with_capacity(QUESTION_COUNT);
    for q in 0..QUESTION_COUNT {
        let pre: Vec<f64> = pairs.iter().map(|(a, _)| f64::from(a.answers[q])).collect();
        let post: Vec<f64> = pairs.iter().map(|(_, b)| f64::from(b.answers[q])).collect();
        let test = wilcoxon_signed_rank(&pre, &post)?;
        rows.push(QuestionRow {
            label: dataset.question_labels[q].clone(),
            pre_mean: mean(&pre),
            pre_median: median(&pre),
            post_mean: mean(&post),
            post_median: median(&post),
            test,
            p_adjusted: 0.0,
            significant: false,
        });
    }
    let raw: Vec<f64> = rows.iter().map(|r| r.test.p_value).collect();
    let adjusted = bonferroni(&raw, BONFERRONI_FAMILY)?;
    let flags = significance_flags(&adjusted, SIGNIFICANCE_LEVEL);
    for ((row, p), flag) in rows.iter_mut().zip(adjusted).zip(flags) {
        row.p_adjusted = p;
        row.significant = flag;
    }

    Ok(Report {
        rows,
        n_paired: pairs.len(),
        excluded,
        segmentation: segment(dataset)?,
    })
}

fn segment(dataset: &QuestionnaireDataset) -> Result<Segmentation, StatsError> {
    let segments: BTreeSet<&str> = dataset.responses.iter().map(|r| r.segment.as_str()).collect();
    if segments.len() != 2 {
        return Ok(Segmentation::Skipped {
            reason: format!(
                "segmentation skipped: need exactly 2 segments, found {}",
                segments.len()
            ),
        });
    }
    let mut it = segments.into_iter();
    let (a, b) = (it.next().unwrap(), it.next().unwrap());
    let mut comparisons = Vec::new();
    for phase in [Phase::Pre, Phase::Post] {
        let scores = |seg: &str| -> Vec<f64> {
            dataset
                .responses_in(phase)
                .filter(|r| r.segment == seg)
                .map(|r| r.mean_score())
                .collect()
        };
        let (sa, sb) = (scores(a), scores(b));
        if sa.is_empty() || sb.is_empty() {
            continue;
        }
        comparisons.push(SegmentComparison {
            phase,
            segment_a: a.to_string(),
            segment_b: b.to_string(),
            n_a: sa.len(),
            n_b: sb.len(),
            mean_a: mean(&sa),
            mean_b: mean(&sb),
            median_a: median(&sa),
            median_b: median(&sb),
            test: mann_whitney_u(&sa, &sb)?,
        });
    }
    if comparisons.is_empty() {
        return Ok(Segmentation::Skipped {
            reason: "segmentation skipped: no phase has responses from both segments".into(),
        });
    }
    Ok(Segmentation::Compared { comparisons })
}

/// `4`, `4.5`, `3.14`: at most two decimals, no trailing zeros.
fn short(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn p_text(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

fn method_name(m: PValueMethod) -> &'static str {
    match m {
        PValueMethod::ExactEnumeration => "exact",
        PValueMethod::NormalApproximation => "normal approx.",
    }
}

impl Report {
    /// Markdown rendering; the question table columns are pre mean, pre
    /// median, post mean, post median, adjusted p.
    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        writeln!(md, "## Self-efficacy: pre vs. post\n").unwrap();
        writeln!(
            md,
            "| Question | Pre mean | Pre median | Post mean | Post median | p-value |"
        )
        .unwrap();
        writeln!(md, "|:---|---:|---:|---:|---:|---:|").unwrap();
        for row in &self.rows {
            let p = if row.significant {
                format!("**{}** *", p_text(row.p_adjusted))
            } else {
                p_text(row.p_adjusted)
            };
            writeln!(
                md,
                "| {} | {:.2} | {} | {:.2} | {} | {} |",
                row.label,
                row.pre_mean,
                short(row.pre_median),
                row.post_mean,
                short(row.post_median),
                p
            )
            .unwrap();
        }
        let methods: BTreeSet<&str> = self.rows.iter().map(|r| method_name(r.test.method)).collect();
        writeln!(
            md,
            "\np-values: two-sided Wilcoxon signed-rank ({}), Bonferroni-adjusted (m = {BONFERRONI_FAMILY}). \
             \\* significant at p < {SIGNIFICANCE_LEVEL}.",
            methods.into_iter().collect::<Vec<_>>().join(", ")
        )
        .unwrap();
        writeln!(md, "Paired participants: {}.", self.n_paired).unwrap();
        if !self.excluded.is_empty() {
            writeln!(
                md,
                "Excluded {} unpaired participant(s): {}.",
                self.excluded.len(),
                self.excluded.join(", ")
            )
            .unwrap();
        }

        writeln!(md, "\n## Segmented comparison\n").unwrap();
        match &self.segmentation {
            Segmentation::Skipped { reason } => writeln!(md, "{reason}").unwrap(),
            Segmentation::Compared { comparisons } => {
                let first = &comparisons[0];
                writeln!(
                    md,
                    "| Phase | {a} mean | {a} median | {b} mean | {b} median | U | p-value |",
                    a = first.segment_a,
                    b = first.segment_b
                )
                .unwrap();
                writeln!(md, "|:---|---:|---:|---:|---:|---:|---:|").unwrap();
                for c in comparisons {
                    writeln!(
                        md,
                        "| {} | {:.2} | {} | {:.2} | {} | {} | {} |",
                        c.phase.label(),
                        c.mean_a,
                        short(c.median_a),
                        c.mean_b,
                        short(c.median_b),
                        c.test.statistic,
                        p_text(c.test.p_value)
                    )
                    .unwrap();
                }
                writeln!(
                    md,
                    "\nTwo-sided Mann-Whitney U on per-participant mean scores ({}).",
                    comparisons
                        .iter()
                        .map(|c| format!(
                            "{}: n = {} vs {}, {}",
                            c.phase.label(),
                            c.n_a,
                            c.n_b,
                            method_name(c.test.method)
                        ))
                        .collect::<Vec<_>>()
                        .join("; ")
                )
                .unwrap();
            }
        }
        md
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::dataset::LikertResponse;

    fn response(id: &str, seg: &str, phase: Phase, v: u8) -> LikertResponse {
        LikertResponse {
            participant_id: id.into(),
            segment: seg.into(),
            phase,
            answers: [v; QUESTION_COUNT],
        }
    }

    #[test]
    fn constant_data() {
        let mut rs = Vec::new();
        for i in 0..6 {
            let id = format!("p{i}");
            rs.push(response(&id, "x", Phase::Pre, 4));
            rs.push(response(&id, "x", Phase::Post, 5));
        }
        let report = summarize(&QuestionnaireDataset::new(rs).unwrap()).unwrap();
        assert_eq!(report.rows.len(), 7);
        for row in &report.rows {
            assert_eq!(
                (row.pre_mean, row.pre_median, row.post_mean, row.post_median),
                (4.0, 4.0, 5.0, 5.0)
            );
            // 6 positive tied differences: p = 2/64, times 7
            assert!((row.p_adjusted - 7.0 * 2.0 / 64.0).abs() < 1e-12);
        }
        assert!(matches!(report.segmentation, Segmentation::Skipped { .. }));
        assert!(report.to_markdown().contains("segmentation skipped"));
    }

    #[test]
    fn identical_segments() {
        let mut rs = Vec::new();
        for (i, seg) in ["a", "b", "a", "b"].iter().enumerate() {
            let id = format!("p{i}");
            rs.push(response(&id, seg, Phase::Pre, 3));
            rs.push(response(&id, seg, Phase::Post, 4));
        }
        let report = summarize(&QuestionnaireDataset::new(rs).unwrap()).unwrap();
        match report.segmentation {
            Segmentation::Compared { comparisons } => {
                assert_eq!(comparisons.len(), 2);
                assert!(comparisons.iter().all(|c| c.test.p_value == 1.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unpaired_excluded_and_no_pairs_error() {
        let rs = vec![
            response("p1", "a", Phase::Pre, 3),
            response("p1", "a", Phase::Post, 4),
            response("p2", "a", Phase::Pre, 3),
        ];
        let report = summarize(&QuestionnaireDataset::new(rs).unwrap()).unwrap();
        assert_eq!(report.excluded, vec!["p2"]);
        assert_eq!(report.n_paired, 1);

        let rs = vec![response("p1", "a", Phase::Pre, 3), response("p2", "a", Phase::Pre, 3)];
        assert_eq!(
            summarize(&QuestionnaireDataset::new(rs).unwrap()),
            Err(StatsError::NoPairedData)
        );
    }

    #[test]
    fn number_formatting() {
        assert_eq!(short(4.0), "4");
        assert_eq!(short(4.5), "4.5");
        assert_eq!(short(3.142857), "3.14");
        assert_eq!(p_text(0.0004), "<0.001");
        assert_eq!(p_text(0.03561), "0.036");
        assert_eq!(p_text(0.05), "0.050");
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[4., 5.]), 4.5);
        assert_eq!(median(&[5., 1., 4.]), 4.0);
    }
}
