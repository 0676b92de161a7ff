use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use thiserror::Error;

use crate::catalog::{Predicate, QuestCatalog, Task};
use crate::gateway::{publish_dashboard, HostError, HostingClient, RetryPolicy};
use crate::progression::{Award, Objective, ProgressError, ProgressState};
use crate::renderer::{render_dashboard, render_feedback, render_quest_issue};
use crate::store::{DeliveryStatus, ProgressStore, StoreError};
use crate::verification::{verify, ActivityEvent, RepoSnapshot, VerificationOutcome};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Progress(#[from] ProgressError),
    #[error("hosting platform: {0}")]
    Host(#[from] HostError),
}

#[derive(Debug, Clone)]
pub struct EngineSettings {
    /// Events sent by this login (the bot's own comments) are ignored.
    pub bot_login: String,
    pub retry: RetryPolicy,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            bot_login: "ossdoorway-bot".into(),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "disposition", rename_all = "snake_case")]
pub enum Disposition {
    /// The delivery id was already processed.
    Duplicate,
    Ignored {
        reason: String,
    },
    NotApplicable,
    Satisfied {
        quest_id: String,
        task_id: String,
    },
    Rejected {
        quest_id: String,
        task_id: String,
        reason: String,
    },
}

impl Disposition {
    pub fn label(&self) -> &'static str {
        match self {
            Disposition::Duplicate => "duplicate",
            Disposition::Ignored { .. } => "ignored",
            Disposition::NotApplicable => "not_applicable",
            Disposition::Satisfied { .. } => "satisfied",
            Disposition::Rejected { .. } => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProcessingSummary {
    pub delivery_id: String,
    pub user: String,
    pub disposition: Disposition,
    pub awards: Vec<Award>,
    /// Outbound calls that still failed after retries. Progress was saved
    /// before any of them ran.
    pub outbound_errors: Vec<String>,
}

/// The per-event pipeline: ledger check, verification, progression,
/// persistence, then feedback and dashboard publishing.
pub struct Engine {
    catalog: Arc<QuestCatalog>,
    host: Arc<dyn HostingClient>,
    store: Arc<dyn ProgressStore>,
    settings: EngineSettings,
    learner_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

struct Target<'a> {
    quest_id: &'a str,
    task: &'a Task,
    outcome: VerificationOutcome,
}

impl Engine {
    pub fn new(
        catalog: Arc<QuestCatalog>,
        host: Arc<dyn HostingClient>,
        store: Arc<dyn ProgressStore>,
        settings: EngineSettings,
    ) -> Self {
        Engine {
            catalog,
            host,
            store,
            settings,
            learner_locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn catalog(&self) -> &QuestCatalog {
        &self.catalog
    }

    pub fn store(&self) -> &dyn ProgressStore {
        self.store.as_ref()
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    fn learner_lock(&self, user: &str) -> Arc<Mutex<()>> {
        let mut locks = self.learner_locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(user.to_ascii_lowercase()).or_default().clone()
    }

    /// Opens one instructions issue per quest in `repo`, saves a fresh state
    /// pointing at them and publishes the first dashboard. A learner who is
    /// already enrolled gets their existing state back unchanged.
    pub fn enroll(&self, user: &str, repo: &str) -> Result<ProgressState, EngineError> {
        let lock = self.learner_lock(user);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(existing) = self.store.load_progress(user)? {
            return Ok(existing);
        }
        let mut state = ProgressState::new(user, &self.catalog);
        for (i, quest) in self.catalog.quests.iter().enumerate() {
            let (title, body) = render_quest_issue(i, quest);
            let number = self
                .settings
                .retry
                .run(|| self.host.create_issue(repo, &title, &body))?;
            state.quest_issues.insert(quest.id.clone(), number);
        }
        self.store.save_progress(&state)?;
        let dashboard = render_dashboard(&state, &self.catalog);
        self.settings
            .retry
            .run(|| publish_dashboard(self.host.as_ref(), repo, &dashboard))?;
        Ok(state)
    }

    pub fn handle_event(&self, event: &ActivityEvent) -> Result<ProcessingSummary, EngineError> {
        let mut summary = ProcessingSummary {
            delivery_id: event.delivery_id.clone(),
            user: event.actor.clone(),
            disposition: Disposition::NotApplicable,
            awards: Vec::new(),
            outbound_errors: Vec::new(),
        };
        if self.store.record_delivery(&event.delivery_id)? == DeliveryStatus::Duplicate {
            summary.disposition = Disposition::Duplicate;
            return Ok(summary);
        }
        if event.actor.eq_ignore_ascii_case(&self.settings.bot_login) {
            summary.disposition = Disposition::Ignored {
                reason: "event sent by the bot itself".into(),
            };
            return Ok(summary);
        }

        let lock = self.learner_lock(&event.actor);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let state = match self.store.load_progress(&event.actor)? {
            Some(s) => s,
            None => ProgressState::new(&event.actor, &self.catalog),
        };

        let view = if self.needs_repo_view(event) {
            self.settings.retry.run(|| self.host.repo_view(&event.repo))?
        } else {
            RepoSnapshot::default()
        };
        let Some(target) = self.target(&state, event, &view) else {
            return Ok(summary);
        };
        let quest_id = target.quest_id.to_string();
        let task_id = target.task.id.clone();

        let next = match &target.outcome {
            VerificationOutcome::NotApplicable => return Ok(summary),
            VerificationOutcome::Satisfied => {
                let (next, awards) = state.apply_completion(&self.catalog, &quest_id, &task_id, event.timestamp)?;
                summary.awards = awards;
                summary.disposition = Disposition::Satisfied {
                    quest_id: quest_id.clone(),
                    task_id,
                };
                next
            }
            VerificationOutcome::Rejected(reason) => {
                summary.disposition = Disposition::Rejected {
                    quest_id: quest_id.clone(),
                    task_id: task_id.clone(),
                    reason: reason.clone(),
                };
                state.record_failure(&self.catalog, &quest_id, &task_id)?
            }
        };
        self.store.save_progress(&next)?;

        let next_title = match next.current_objective(&self.catalog) {
            Objective::Task { quest_id, task_id } => {
                self.catalog.task(&quest_id, &task_id).ok().map(|t| t.title.clone())
            }
            Objective::AllComplete => None,
        };
        let feedback = render_feedback(&target.outcome, &summary.awards, next_title.as_deref());
        let issue = next.quest_issue(&quest_id).or(event.issue_number);
        if let Some(issue) = issue {
            if let Err(e) = self
                .settings
                .retry
                .run(|| self.host.post_comment(&event.repo, issue, &feedback))
            {
                log::error!("posting feedback for {} failed: {e}", event.delivery_id);
                summary.outbound_errors.push(format!("post_comment: {e}"));
            }
        }
        let dashboard = render_dashboard(&next, &self.catalog);
        if let Err(e) = self
            .settings
            .retry
            .run(|| publish_dashboard(self.host.as_ref(), &event.repo, &dashboard))
        {
            log::error!("publishing dashboard for {} failed: {e}", event.delivery_id);
            summary.outbound_errors.push(format!("publish_dashboard: {e}"));
        }
        Ok(summary)
    }

    fn needs_repo_view(&self, event: &ActivityEvent) -> bool {
        self.catalog.iter_tasks().any(|(_, t)| {
            t.verification_spec.event_kind == event.kind
                && matches!(t.verification_spec.predicate, Predicate::ContainsMention)
        })
    }

    /// Picks the task an event is judged against. Sequential catalogs only
    /// check the current objective; an event that fails it but would satisfy
    /// a later task is rejected with a hint naming the current one. Otherwise the first unlocked task the event
    /// satisfies wins, then the first that rejects it.
    fn target<'a>(&'a self, state: &ProgressState, event: &ActivityEvent, view: &RepoSnapshot) -> Option<Target<'a>> {
        let catalog = self.catalog.as_ref();
        let check = |quest_id: &str, task: &Task| verify(task, state.quest_issue(quest_id), event, view);
        if catalog.sequential_tasks {
            let Objective::Task { quest_id, task_id } = state.current_objective(catalog) else {
                return None;
            };
            let qi = catalog.quest_index(&quest_id)?;
            let quest = &catalog.quests[qi];
            let task = quest.task(&task_id)?;
            let mut outcome = check(&quest.id, task);
            if !outcome.is_satisfied() {
                let ahead = catalog
                    .iter_tasks()
                    .filter(|(q, t)| !state.is_completed(&q.id, &t.id) && !(q.id == quest_id && t.id == task_id))
                    .find(|(q, t)| check(&q.id, t) == VerificationOutcome::Satisfied);
                if let Some((_, later)) = ahead {
                    outcome = VerificationOutcome::Rejected(format!(
                        "that answers \"{}\", but your current task is \"{}\"",
                        later.title, task.title
                    ));
                }
            }
            return Some(Target {
                quest_id: &quest.id,
                task,
                outcome,
            });
        }

        let open: Vec<_> = catalog
            .iter_tasks()
            .filter(|(q, t)| {
                !state.is_completed(&q.id, &t.id) && state.is_task_unlocked(catalog, &q.id, &t.id).unwrap_or(false)
            })
            .map(|(q, t)| (q, t, check(&q.id, t)))
            .collect();
        let pick = open.iter().position(|(_, _, o)| o.is_satisfied()).or_else(|| {
            open.iter()
                .position(|(_, _, o)| matches!(o, VerificationOutcome::Rejected(_)))
        })?;
        let (q, t, outcome) = open.into_iter().nth(pick)?;
        Some(Target {
            quest_id: &q.id,
            task: t,
            outcome,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::default_catalog;
    use crate::gateway::{Normalized, RawDelivery, SimulatedHost, DASHBOARD_PATH};
    use crate::renderer::section;
    use crate::store::MemoryStore;

    struct Fixture {
        host: Arc<SimulatedHost>,
        store: Arc<MemoryStore>,
        engine: Engine,
        repo: String,
    }

    fn fixture() -> Fixture {
        let catalog = Arc::new(default_catalog());
        let host = Arc::new(SimulatedHost::default());
        let store = Arc::new(MemoryStore::new(catalog.clone()));
        let settings = EngineSettings {
            retry: RetryPolicy::immediate(),
            ..Default::default()
        };
        let engine = Engine::new(catalog, host.clone(), store.clone(), settings);
        let repo = "alice/ossdoorway-sandbox".to_string();
        host.create_repo(&repo, &["maintainer-ana"]).unwrap();
        engine.enroll("alice", &repo).unwrap();
        host.take_deliveries();
        Fixture {
            host,
            store,
            engine,
            repo,
        }
    }

    fn event(d: &RawDelivery) -> ActivityEvent {
        match d.normalize().unwrap() {
            Normalized::Event(e) => e,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn enrollment_opens_issues_and_dashboard() {
        let f = fixture();
        let state = f.store.load_progress("alice").unwrap().unwrap();
        assert_eq!(state.quest_issues.values().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
        let readme = f.host.get_file(&f.repo, DASHBOARD_PATH).unwrap().unwrap();
        assert!(section(&readme, "progress").unwrap().contains("(0/12 tasks)"));
        // idempotent
        assert_eq!(f.engine.enroll("alice", &f.repo).unwrap(), state);
    }

    #[test]
    fn first_task_end_to_end() {
        let f = fixture();
        let d = f
            .host
            .comment_as("alice", &f.repo, 1, "found it: /alice/ossdoorway-sandbox/issues")
            .unwrap();
        let s = f.engine.handle_event(&event(&d)).unwrap();
        assert_eq!(s.disposition.label(), "satisfied");
        assert!(s.outbound_errors.is_empty());
        let feedback = f.host.comments(&f.repo, 1).last().unwrap().body.clone();
        assert!(feedback.contains("+10 XP"));
        let readme = f.host.get_file(&f.repo, DASHBOARD_PATH).unwrap().unwrap();
        assert!(section(&readme, "progress").unwrap().contains("(1/12 tasks)"));

        // replay: no side effects
        let before = f.host.comments(&f.repo, 1).len();
        let again = f.engine.handle_event(&event(&d)).unwrap();
        assert_eq!(again.disposition, Disposition::Duplicate);
        assert_eq!(f.host.comments(&f.repo, 1).len(), before);
    }

    #[test]
    fn unrelated_issue_is_not_applicable() {
        let f = fixture();
        let d = f.host.comment_as("alice", &f.repo, 2, "/issues").unwrap();
        let s = f.engine.handle_event(&event(&d)).unwrap();
        assert_eq!(s.disposition, Disposition::NotApplicable);
        assert_eq!(f.host.comments(&f.repo, 2).len(), 2);
    }

    #[test]
    fn wrong_answer_and_future_task() {
        let f = fixture();
        let d = f.host.comment_as("alice", &f.repo, 1, "I looked around").unwrap();
        let s = f.engine.handle_event(&event(&d)).unwrap();
        assert_eq!(s.disposition.label(), "rejected");
        assert!(f
            .host
            .comments(&f.repo, 1)
            .last()
            .unwrap()
            .body
            .contains("Not quite yet"));

        // answers task 2 while task 1 is current
        let d = f.host.comment_as("alice", &f.repo, 1, "see /pulls").unwrap();
        match f.engine.handle_event(&event(&d)).unwrap().disposition {
            Disposition::Rejected { task_id, reason, .. } => {
                assert_eq!(task_id, "explore-issue-tracker");
                assert!(reason.contains("Explore the issue tracker"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
        let state = f.store.load_progress("alice").unwrap().unwrap();
        assert_eq!(state.attempts_for("quest1", "explore-issue-tracker"), 2);
        assert_eq!(state.xp, 0);
    }

    #[test]
    fn bot_events_ignored() {
        let f = fixture();
        f.host.post_comment(&f.repo, 1, "/issues").unwrap();
        let d = f.host.take_deliveries().pop().unwrap();
        let s = f.engine.handle_event(&event(&d)).unwrap();
        assert!(matches!(s.disposition, Disposition::Ignored { .. }));
    }

    #[test]
    fn publish_failure_keeps_progress() {
        let f = fixture();
        f.host.deny_writes(&f.repo, true).unwrap();
        let d = f.host.comment_as("alice", &f.repo, 1, "/issues").unwrap();
        let s = f.engine.handle_event(&event(&d)).unwrap();
        assert_eq!(s.disposition.label(), "satisfied");
        assert_eq!(s.outbound_errors.len(), 2);
        assert_eq!(f.store.load_progress("alice").unwrap().unwrap().xp, 10);
    }

    #[test]
    fn transient_failures_are_retried() {
        let f = fixture();
        f.host.fail_next_transport(2);
        let d = f.host.comment_as("alice", &f.repo, 1, "/issues").unwrap();
        let s = f.engine.handle_event(&event(&d)).unwrap();
        assert!(s.outbound_errors.is_empty());
    }
}
