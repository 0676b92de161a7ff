use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const QUESTION_COUNT: usize = 7;

/// Short labels for the seven "I am confident that I can..." items.
pub const QUESTION_LABELS: [&str; QUESTION_COUNT] = [
    "Q1 find open issues in the issue tracker",
    "Q2 understand pull requests",
    "Q3 fork repositories",
    "Q4 find help with an issue on the web interface",
    "Q5 open a pull request on the web interface",
    "Q6 find an issue and assign it to myself",
    "Q7 contribute to projects",
];

const REQUIRED_COLUMNS: [&str; 10] = [
    "participant_id",
    "segment",
    "phase",
    "q1",
    "q2",
    "q3",
    "q4",
    "q5",
    "q6",
    "q7",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    Post,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Pre => "Pre",
            Phase::Post => "Post",
        }
    }
}

/// One participant's answers for one phase, each in `1..=5`
/// (1 = strongly disagree, 5 = strongly agree).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertResponse {
    pub participant_id: String,
    pub segment: String,
    pub phase: Phase,
    pub answers: [u8; QUESTION_COUNT],
}

impl LikertResponse {
    pub fn mean_score(&self) -> f64 {
        self.answers.iter().map(|&a| f64::from(a)).sum::<f64>() / QUESTION_COUNT as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireDataset {
    pub responses: Vec<LikertResponse>,
    pub question_labels: [String; QUESTION_COUNT],
}

impl QuestionnaireDataset {
    /// Builds a dataset, rejecting out-of-range answers and repeated
    /// (participant, phase) records.
    pub fn new(responses: Vec<LikertResponse>) -> Result<Self, DatasetError> {
        let mut seen = BTreeSet::new();
        for (i, r) in responses.iter().enumerate() {
            let row = |message: String| DatasetError::Row {
                line: i as u64 + 1,
                message,
            };
            if r.answers.iter().any(|a| !(1..=5).contains(a)) {
                return Err(row("answers must be integers from 1 to 5".into()));
            }
            if !seen.insert((r.participant_id.clone(), r.phase)) {
                return Err(row(format!(
                    "participant `{}` has more than one {} record",
                    r.participant_id,
                    r.phase.label()
                )));
            }
        }
        Ok(QuestionnaireDataset {
            responses,
            question_labels: QUESTION_LABELS.map(str::to_string),
        })
    }

    /// Parses the CSV interface: header
    /// `participant_id,segment,phase,q1,...,q7`, phase `pre` or `post`.
    /// `segment_column` names the column holding segment labels; extra
    /// columns are allowed. Errors carry the 1-based file line.
    pub fn from_csv(text: &str, segment_column: &str) -> Result<Self, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| DatasetError::Csv(e.to_string()))?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
        };
        for name in REQUIRED_COLUMNS {
            column(name)?;
        }
        let id_col = column("participant_id")?;
        let seg_col = column(segment_column)?;
        let phase_col = column("phase")?;
        let q_cols: Vec<usize> = (1..=QUESTION_COUNT)
            .map(|q| column(&format!("q{q}")))
            .collect::<Result<_, _>>()?;

        let mut responses = Vec::new();
        let mut lines = BTreeMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                DatasetError::Row {
                    line,
                    message: e.to_string(),
                }
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let row = |message: String| DatasetError::Row { line, message };
            let field = |i: usize| record.get(i).unwrap_or("");
            let participant_id = field(id_col).to_string();
            if participant_id.is_empty() {
                return Err(row("empty participant_id".into()));
            }
            let phase = match field(phase_col).to_ascii_lowercase().as_str() {
                "pre" => Phase::Pre,
                "post" => Phase::Post,
                other => return Err(row(format!("phase must be `pre` or `post`, got `{other}`"))),
            };
            let mut answers = [0u8; QUESTION_COUNT];
            for (q, (&col, slot)) in q_cols.iter().zip(answers.iter_mut()).enumerate() {
                let raw = field(col);
                *slot = raw
                    .parse::<u8>()
                    .ok()
                    .filter(|a| (1..=5).contains(a))
                    .ok_or_else(|| row(format!("q{} must be an integer from 1 to 5, got `{raw}`", q + 1)))?;
            }
            if let Some(prev) = lines.insert((participant_id.clone(), phase), line) {
                return Err(row(format!(
                    "participant `{participant_id}` already has a {} record on line {prev}",
                    phase.label().to_lowercase()
                )));
            }
            responses.push(LikertResponse {
                participant_id,
                segment: field(seg_col).to_string(),
                phase,
                answers,
            });
        }
        Self::new(responses)
    }

    pub fn responses_in(&self, phase: Phase) -> impl Iterator<Item = &LikertResponse> {
        self.responses.iter().filter(move |r| r.phase == phase)
    }

    /// Participants with both phases (sorted by id), and the ids of those
    /// missing one.
    pub fn paired(&self) -> (Vec<(&LikertResponse, &LikertResponse)>, Vec<String>) {
        let mut by_id: BTreeMap<&str, (Option<&LikertResponse>, Option<&LikertResponse>)> = BTreeMap::new();
        for r in &self.responses {
            let slot = by_id.entry(&r.participant_id).or_default();
            match r.phase {
                Phase::Pre => slot.0 = Some(r),
                Phase::Post => slot.1 = Some(r),
            }
        }
        let mut pairs = Vec::new();
        let mut unpaired = Vec::new();
        for (id, slot) in by_id {
            match slot {
                (Some(pre), Some(post)) => pairs.push((pre, post)),
                _ => unpaired.push(id.to_string()),
            }
        }
        (pairs, unpaired)
    }
}
