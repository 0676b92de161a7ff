//! Decides whether a normalized repository event completes a task.
//!
//! [`verify`] is pure: it only reads the task, the event and a read-only
//! [`RepoView`]. Failures are reported as [`VerificationOutcome::Rejected`]
//! with a reason the learner can act on, never as errors.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::catalog::{Predicate, Task};

pub use crate::catalog::EventKind;

/// Maximum length of a hosting-platform login.
pub const MAX_LOGIN_LEN: usize = 39;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub delivery_id: String,
    pub kind: EventKind,
    pub actor: String,
    /// `owner/name` of the repository the event happened in.
    pub repo: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issue_number: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignee: Option<String>,
    #[serde(default)]
    pub mentions: Vec<String>,
    #[serde(default)]
    pub linked_issues: Vec<u64>,
    pub timestamp: DateTime<Utc>,
}

impl ActivityEvent {
    /// Checks the per-kind field requirements.
    pub fn validate(&self) -> Result<(), String> {
        if self.delivery_id.is_empty() {
            return Err("delivery id is empty".into());
        }
        if self.actor.is_empty() {
            return Err("actor is empty".into());
        }
        let needs_issue = matches!(
            self.kind,
            EventKind::IssueComment | EventKind::IssueAssigned | EventKind::IssueClosed
        );
        if needs_issue && self.issue_number.is_none() {
            return Err(format!("{} event without issue number", self.kind));
        }
        if self.kind == EventKind::IssueComment && self.body.is_none() {
            return Err("issue_comment event without body".into());
        }
        if self.kind == EventKind::IssueAssigned && self.assignee.is_none() {
            return Err("issue_assigned event without assignee".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueState {
    Open,
    Closed,
}

/// Read-only queries against a repository, for predicates the event alone
/// cannot settle.
pub trait RepoView {
    fn fork_exists(&self, actor: &str) -> bool;
    fn issue_state(&self, number: u64) -> Option<IssueState>;
    fn issue_assignees(&self, number: u64) -> Vec<String>;
    fn contributors(&self) -> Vec<String>;
}

/// A point-in-time copy of the repository facts a [`RepoView`] exposes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoSnapshot {
    pub contributors: Vec<String>,
    pub fork_owners: BTreeSet<String>,
    pub issues: BTreeMap<u64, IssueSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueSnapshot {
    pub state: IssueState,
    pub assignees: Vec<String>,
}

impl RepoView for RepoSnapshot {
    fn fork_exists(&self, actor: &str) -> bool {
        self.fork_owners.iter().any(|o| o.eq_ignore_ascii_case(actor))
    }

    fn issue_state(&self, number: u64) -> Option<IssueState> {
        self.issues.get(&number).map(|i| i.state)
    }

    fn issue_assignees(&self, number: u64) -> Vec<String> {
        self.issues
            .get(&number)
            .map(|i| i.assignees.clone())
            .unwrap_or_default()
    }

    fn contributors(&self) -> Vec<String> {
        self.contributors.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "reason", rename_all = "snake_case")]
pub enum VerificationOutcome {
    Satisfied,
    Rejected(String),
    NotApplicable,
}

impl VerificationOutcome {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, VerificationOutcome::Satisfied)
    }
}

fn rejected(reason: impl Into<String>) -> VerificationOutcome {
    VerificationOutcome::Rejected(reason.into())
}

/// Checks `event` against `task`. `quest_issue` is the learner's issue for
/// the task's quest; scoped tasks and `LinksIssue` need it.
pub fn verify(
    task: &Task,
    quest_issue: Option<u64>,
    event: &ActivityEvent,
    view: &dyn RepoView,
) -> VerificationOutcome {
    let spec = &task.verification_spec;
    if event.kind != spec.event_kind {
        return VerificationOutcome::NotApplicable;
    }
    if spec.quest_issue_scoped && (quest_issue.is_none() || event.issue_number != quest_issue) {
        return VerificationOutcome::NotApplicable;
    }
    let body = event.body.as_deref().unwrap_or("");
    match &spec.predicate {
        Predicate::AnswerPattern(pattern) => {
            if pattern.is_match(body) {
                VerificationOutcome::Satisfied
            } else {
                rejected("your answer does not look right yet; check the task instructions")
            }
        }
        Predicate::SelfAssignment => match event.assignee.as_deref() {
            Some(assignee) if assignee.eq_ignore_ascii_case(&event.actor) => VerificationOutcome::Satisfied,
            _ => rejected("assignee is not you"),
        },
        Predicate::ContainsMention => {
            if event.mentions.is_empty() {
                return rejected("your comment does not mention anyone");
            }
            let contributors = view.contributors();
            let hit = event.mentions.iter().any(|m| {
                let m = m.trim_start_matches('@');
                !m.eq_ignore_ascii_case(&event.actor) && contributors.iter().any(|c| c.eq_ignore_ascii_case(m))
            });
            if hit {
                VerificationOutcome::Satisfied
            } else {
                rejected("nobody you mentioned is a contributor of this project")
            }
        }
        Predicate::LinksIssue => match quest_issue {
            Some(n) if event.linked_issues.contains(&n) => VerificationOutcome::Satisfied,
            Some(n) => rejected(format!("the pull request does not reference issue #{n}")),
            None => rejected("there is no issue to link for this quest"),
        },
        Predicate::RequestsReview(pattern) => {
            if pattern.is_match(body) {
                VerificationOutcome::Satisfied
            } else {
                rejected("your comment does not ask for a review")
            }
        }
        Predicate::Always => VerificationOutcome::Satisfied,
    }
}

fn mention_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:^|[^A-Za-z0-9_\-@./`])@([A-Za-z0-9\-]+)").unwrap())
}

fn issue_ref_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:^|[^A-Za-z0-9_&/#])#([0-9]+)\b").unwrap())
}

/// Extracts `@login` mentions, first occurrence order, deduplicated
/// case-insensitively, without the leading `@`.
///
/// A mention starts at the beginning of the text or after a character that
/// cannot be part of a word, address or path (so `a@b.com` is not one). The
/// login is the maximal run of ASCII letters, digits and hyphens and must not
/// start or end with a hyphen or exceed 39 characters.
pub fn parse_mentions(body: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for cap in mention_regex().captures_iter(body) {
        let login = &cap[1];
        if login.len() > MAX_LOGIN_LEN || login.starts_with('-') || login.ends_with('-') {
            continue;
        }
        if seen.insert(login.to_ascii_lowercase()) {
            out.push(login.to_string());
        }
    }
    out
}

/// Extracts `#N` issue references (including `fixes #N`, `closes #N`,
/// `resolves #N`), deduplicated and ascending.
pub fn parse_issue_links(text: &str) -> Vec<u64> {
    let set: BTreeSet<u64> = issue_ref_regex()
        .captures_iter(text)
        .filter_map(|c| c[1].parse::<u64>().ok())
        .filter(|&n| n > 0)
        .collect();
    set.into_iter().collect()
}
