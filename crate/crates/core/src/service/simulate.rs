use std::fmt::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::engine::{Disposition, Engine, EngineError, EngineSettings};
use crate::catalog::QuestCatalog;
use crate::gateway::{
    ingest, HostError, Normalized, RawDelivery, RetryPolicy, SimulatedHost, SANDBOX_CONTRIBUTORS, SANDBOX_REPO_NAME,
};
use crate::progression::{Award, ProgressState};
use crate::renderer::{award_line, render_dashboard};
use crate::store::{MemoryStore, ProgressStore, StoreError};

const SIM_SECRET: &[u8] = b"ossdoorway-simulation";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Comment,
    Assign,
    OpenPr,
    CloseIssue,
    Fork,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Satisfied,
    Rejected,
    NotApplicable,
}

impl Expectation {
    fn label(self) -> &'static str {
        match self {
            Expectation::Satisfied => "satisfied",
            Expectation::Rejected => "rejected",
            Expectation::NotApplicable => "not_applicable",
        }
    }
}

/// One learner action. `quest` selects the quest's instructions issue for
/// comment, assign and close actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptAction {
    pub kind: ActionKind,
    #[serde(default)]
    pub quest: Option<String>,
    #[serde(default)]
    pub body: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
    /// Defaults to the learner.
    #[serde(default)]
    pub assignee: Option<String>,
    #[serde(default)]
    pub expect: Option<Expectation>,
    /// Task id the action is expected to be judged against.
    #[serde(default)]
    pub expect_task: Option<String>,
}

/// A scripted learner session:
///
/// ```toml
/// user = "alice"
///
/// [[action]]
/// kind = "comment"          # comment | assign | open_pr | close_issue | fork
/// quest = "quest1"
/// body = "Found it: https://github.com/alice/ossdoorway-sandbox/issues"
/// expect = "satisfied"      # satisfied | rejected | not_applicable
/// expect_task = "explore-issue-tracker"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionScript {
    pub user: String,
    #[serde(default, rename = "action")]
    pub actions: Vec<ScriptAction>,
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid script: {0}")]
    Parse(String),
    #[error("action {index}: {message}")]
    InvalidAction { index: usize, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("simulated host: {0}")]
    Host(#[from] HostError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl SessionScript {
    pub fn parse(text: &str) -> Result<Self, SimulationError> {
        toml::from_str(text).map_err(|e| SimulationError::Parse(e.to_string()))
    }

    /// Checks every reference against the catalog before anything runs.
    pub fn validate(&self, catalog: &QuestCatalog) -> Result<(), SimulationError> {
        let valid_login = !self.user.is_empty()
            && self.user.len() <= crate::verification::MAX_LOGIN_LEN
            && !self.user.starts_with('-')
            && !self.user.ends_with('-')
            && self.user.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
        if !valid_login {
            return Err(SimulationError::Parse(format!("`{}` is not a valid login", self.user)));
        }
        for (i, a) in self.actions.iter().enumerate() {
            let bad = |message: String| SimulationError::InvalidAction { index: i + 1, message };
            match &a.quest {
                Some(q) if catalog.quest(q).is_none() => return Err(bad(format!("unknown quest `{q}`"))),
                None if matches!(
                    a.kind,
                    ActionKind::Comment | ActionKind::Assign | ActionKind::CloseIssue
                ) =>
                {
                    return Err(bad("`quest` is required for this action".into()))
                }
                _ => {}
            }
            if a.kind == ActionKind::Comment && a.body.is_none() {
                return Err(bad("comment actions need a `body`".into()));
            }
            if let Some(t) = &a.expect_task {
                if !catalog.iter_tasks().any(|(_, task)| &task.id == t) {
                    return Err(bad(format!("unknown task `{t}`")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub description: String,
    pub disposition: Disposition,
    pub awards: Vec<Award>,
    pub expected: Option<Expectation>,
    pub mismatch: Option<String>,
    pub xp: u32,
    pub level: u32,
    pub streak: u32,
    pub completed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub user: String,
    pub repo: String,
    pub steps: Vec<StepRecord>,
    pub final_state: ProgressState,
    pub dashboard: String,
    total_tasks: usize,
}

impl Transcript {
    pub fn mismatches(&self) -> usize {
        self.steps.iter().filter(|s| s.mismatch.is_some()).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "simulated session for {} on {} ({} actions)",
            self.user,
            self.repo,
            self.steps.len()
        )
        .unwrap();
        for (i, step) in self.steps.iter().enumerate() {
            writeln!(out, "\n[{}] {}", i + 1, step.description).unwrap();
            let outcome = match &step.disposition {
                Disposition::Satisfied { quest_id, task_id } => format!("satisfied: {quest_id}/{task_id}"),
                Disposition::Rejected {
                    quest_id,
                    task_id,
                    reason,
                } => {
                    format!("rejected: {quest_id}/{task_id}: {reason}")
                }
                other => other.label().to_string(),
            };
            writeln!(out, "    {outcome}").unwrap();
            for award in &step.awards {
                writeln!(out, "    {}", award_line(award)).unwrap();
            }
            writeln!(
                out,
                "    xp {} | level {} | streak {} | {}/{} tasks",
                step.xp, step.level, step.streak, step.completed, self.total_tasks
            )
            .unwrap();
            if let Some(m) = &step.mismatch {
                writeln!(out, "    MISMATCH: {m}").unwrap();
            }
        }
        let s = &self.final_state;
        writeln!(
            out,
            "\nfinal: xp {} | level {} | {}/{} tasks | badges: {}",
            s.xp,
            s.level,
            s.completed.len(),
            self.total_tasks,
            if s.badges.is_empty() {
                "none".to_string()
            } else {
                s.badges.iter().cloned().collect::<Vec<_>>().join(", ")
            }
        )
        .unwrap();
        writeln!(out, "mismatches: {}", self.mismatches()).unwrap();
        writeln!(out, "\n--- dashboard ---\n").unwrap();
        out.push_str(&self.dashboard);
        out
    }
}

/// Runs `script` against a fresh [`SimulatedHost`] and in-memory store.
///
/// Every delivery the host emits goes through the same signed-webhook path a
/// live server uses, including the bot's own comments. The result depends
/// only on the script and the catalog.
pub fn simulate_session(
    script: &SessionScript,
    catalog: Arc<QuestCatalog>,
    bot_login: &str,
) -> Result<Transcript, SimulationError> {
    script.validate(&catalog)?;
    let host = Arc::new(SimulatedHost::new(bot_login));
    let store = Arc::new(MemoryStore::new(catalog.clone()));
    let settings = EngineSettings {
        bot_login: bot_login.to_string(),
        retry: RetryPolicy::immediate(),
    };
    let engine = Engine::new(catalog.clone(), host.clone(), store.clone(), settings);
    let user = script.user.as_str();
    let repo = format!("{user}/{SANDBOX_REPO_NAME}");
    host.create_repo(&repo, &SANDBOX_CONTRIBUTORS)?;
    let enrolled = engine.enroll(user, &repo)?;
    host.take_deliveries();

    let mut steps = Vec::with_capacity(script.actions.len());
    for action in &script.actions {
        let issue = action.quest.as_deref().and_then(|q| enrolled.quest_issue(q));
        let (description, delivery) = perform(&host, user, &repo, action, issue)?;
        let mut pending = host.take_deliveries();
        debug_assert_eq!(pending.first(), Some(&delivery));
        let mut first = None;
        while !pending.is_empty() {
            for d in pending {
                let summary = run_delivery(&engine, &d)?;
                first.get_or_insert(summary);
            }
            pending = host.take_deliveries();
        }
        let summary = first.expect("every action emits a delivery");

        let state = store
            .load_progress(user)?
            .unwrap_or_else(|| ProgressState::new(user, &catalog));
        let mut mismatch = None;
        if let Some(expected) = action.expect {
            if expected.label() != summary.disposition.label() {
                mismatch = Some(format!(
                    "expected {}, got {}",
                    expected.label(),
                    summary.disposition.label()
                ));
            }
        }
        if let Some(want) = &action.expect_task {
            let got = match &summary.disposition {
                Disposition::Satisfied { task_id, .. } | Disposition::Rejected { task_id, .. } => Some(task_id),
                _ => None,
            };
            if got != Some(want) && mismatch.is_none() {
                mismatch = Some(format!(
                    "expected task {want}, got {}",
                    got.map_or("none", |t| t.as_str())
                ));
            }
        }
        steps.push(StepRecord {
            description,
            disposition: summary.disposition,
            awards: summary.awards,
            expected: action.expect,
            mismatch,
            xp: state.xp,
            level: state.level,
            streak: state.streak_counter,
            completed: state.completed.len(),
        });
    }

    let final_state = store.load_progress(user)?.unwrap_or(enrolled);
    let dashboard = render_dashboard(&final_state, &catalog);
    Ok(Transcript {
        user: user.to_string(),
        repo,
        steps,
        final_state,
        dashboard,
        total_tasks: catalog.total_tasks(),
    })
}

fn run_delivery(engine: &Engine, delivery: &RawDelivery) -> Result<super::engine::ProcessingSummary, SimulationError> {
    let request = delivery.to_request(SIM_SECRET);
    match ingest(SIM_SECRET, &request) {
        Ok(Normalized::Event(event)) => Ok(engine.handle_event(&event)?),
        Ok(Normalized::Unsupported { event_name, action }) => Ok(super::engine::ProcessingSummary {
            delivery_id: delivery.delivery_id.clone(),
            user: String::new(),
            disposition: Disposition::Ignored {
                reason: format!("unsupported event {event_name}/{}", action.unwrap_or_default()),
            },
            awards: Vec::new(),
            outbound_errors: Vec::new(),
        }),
        Err(e) => Err(SimulationError::Parse(format!("simulated delivery rejected: {e}"))),
    }
}

fn quoted(text: &str) -> String {
    let one_line: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    format!("{one_line:?}")
}

fn perform(
    host: &SimulatedHost,
    user: &str,
    repo: &str,
    action: &ScriptAction,
    issue: Option<u64>,
) -> Result<(String, RawDelivery), SimulationError> {
    let issue_num = || issue.expect("validated: quest present");
    Ok(match action.kind {
        ActionKind::Comment => {
            let body = action.body.as_deref().unwrap_or_default();
            let n = issue_num();
            (
                format!("comment on #{n}: {}", quoted(body)),
                host.comment_as(user, repo, n, body)?,
            )
        }
        ActionKind::Assign => {
            let n = issue_num();
            let assignee = action.assignee.as_deref().unwrap_or(user);
            (
                format!("assign #{n} to {assignee}"),
                host.assign_as(user, repo, n, assignee)?,
            )
        }
        ActionKind::OpenPr => {
            let title = action.title.as_deref().unwrap_or("Update documentation");
            let body = action.body.as_deref().unwrap_or_default();
            (
                format!("open pull request {}: {}", quoted(title), quoted(body)),
                host.open_pr_as(user, repo, title, body)?,
            )
        }
        ActionKind::CloseIssue => {
            let n = issue_num();
            (format!("close #{n}"), host.close_issue_as(user, repo, n)?)
        }
        ActionKind::Fork => (format!("fork {repo}"), host.fork_as(user, repo)?),
    })
}
