use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, Duration, TimeZone, Utc};
use serde_json::{json, Value};

use super::host::{HostError, HostingClient};
use super::normalize::{normalize_event, NormalizeError, Normalized, WebhookRequest};
use super::signature::sign;
use crate::catalog::QuestCatalog;
use crate::renderer::render_quest_issue;
use crate::verification::{IssueSnapshot, IssueState, RepoSnapshot};

/// Name of the learner's sandbox repository (`<login>/ossdoorway-sandbox`).
pub const SANDBOX_REPO_NAME: &str = "ossdoorway-sandbox";

/// Contributors seeded into every simulated sandbox.
pub const SANDBOX_CONTRIBUTORS: [&str; 2] = ["maintainer-ana", "octo-dev"];

/// A webhook delivery as the platform would send it.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDelivery {
    pub event_name: String,
    pub delivery_id: String,
    pub payload: Value,
}

impl RawDelivery {
    pub fn body(&self) -> Vec<u8> {
        serde_json::to_vec(&self.payload).expect("JSON value serializes")
    }

    /// The signed HTTP request carrying this delivery.
    pub fn to_request(&self, secret: &[u8]) -> WebhookRequest {
        let body = self.body();
        WebhookRequest {
            event_name: self.event_name.clone(),
            delivery_id: self.delivery_id.clone(),
            signature: sign(secret, &body),
            body,
        }
    }

    pub fn normalize(&self) -> Result<Normalized, NormalizeError> {
        normalize_event(&self.event_name, &self.delivery_id, &self.payload)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimComment {
    pub author: String,
    pub body: String,
}

#[derive(Debug, Clone)]
struct SimIssue {
    title: String,
    state: IssueState,
    assignees: Vec<String>,
    comments: Vec<SimComment>,
}

#[derive(Debug, Clone)]
struct SimPull {
    author: String,
}

#[derive(Debug, Clone, Default)]
struct SimRepo {
    files: BTreeMap<String, String>,
    issues: BTreeMap<u64, SimIssue>,
    pulls: BTreeMap<u64, SimPull>,
    next_number: u64,
    forks: BTreeSet<String>,
    contributors: Vec<String>,
    writes_denied: bool,
}

#[derive(Debug)]
struct SimState {
    repos: BTreeMap<String, SimRepo>,
    clock: DateTime<Utc>,
    next_delivery: u64,
    sink: Vec<RawDelivery>,
    bot_login: String,
    transport_failures: u32,
}

/// In-memory stand-in for the hosting platform.
///
/// Learner actions (`*_as` methods) and bot comments mutate the repositories
/// and append a platform-shaped webhook delivery to an internal sink, with
/// sequential synthetic delivery ids and a clock that advances one minute per
/// mutation, so a session replays identically.
#[derive(Debug)]
pub struct SimulatedHost {
    state: Mutex<SimState>,
}

fn not_found(what: impl Into<String>) -> HostError {
    HostError::NotFound(what.into())
}

impl SimState {
    fn repo(&self, repo: &str) -> Result<&SimRepo, HostError> {
        self.repos
            .get(repo)
            .ok_or_else(|| not_found(format!("repository {repo}")))
    }

    fn repo_mut(&mut self, repo: &str) -> Result<&mut SimRepo, HostError> {
        self.repos
            .get_mut(repo)
            .ok_or_else(|| not_found(format!("repository {repo}")))
    }

    fn tick(&mut self) -> String {
        self.clock += Duration::minutes(1);
        self.clock.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }

    fn emit(&mut self, event_name: &str, payload: Value) -> RawDelivery {
        self.next_delivery += 1;
        let delivery = RawDelivery {
            event_name: event_name.to_string(),
            delivery_id: format!("sim-{:06}", self.next_delivery),
            payload,
        };
        self.sink.push(delivery.clone());
        delivery
    }

    fn outbound_check(&mut self) -> Result<(), HostError> {
        if self.transport_failures > 0 {
            self.transport_failures -= 1;
            return Err(HostError::Transport("simulated network failure".into()));
        }
        Ok(())
    }

    fn comment(&mut self, actor: &str, repo: &str, issue: u64, body: &str) -> Result<RawDelivery, HostError> {
        let now = self.tick();
        let r = self.repo_mut(repo)?;
        let entry = r
            .issues
            .get_mut(&issue)
            .ok_or_else(|| not_found(format!("issue #{issue}")))?;
        entry.comments.push(SimComment {
            author: actor.to_string(),
            body: body.to_string(),
        });
        let title = entry.title.clone();
        Ok(self.emit(
            "issue_comment",
            json!({
                "action": "created",
                "issue": {"number": issue, "title": title},
                "comment": {"body": body, "created_at": now, "user": {"login": actor}},
                "repository": {"full_name": repo},
                "sender": {"login": actor},
            }),
        ))
    }
}

impl Default for SimulatedHost {
    fn default() -> Self {
        Self::new("ossdoorway-bot")
    }
}

impl SimulatedHost {
    pub fn new(bot_login: &str) -> Self {
        SimulatedHost {
            state: Mutex::new(SimState {
                repos: BTreeMap::new(),
                clock: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
                next_delivery: 0,
                sink: Vec::new(),
                bot_login: bot_login.to_string(),
                transport_failures: 0,
            }),
        }
    }

    fn lock(&self) -> MutexGuard<'_, SimState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn bot_login(&self) -> String {
        self.lock().bot_login.clone()
    }

    pub fn create_repo(&self, repo: &str, contributors: &[&str]) -> Result<(), HostError> {
        let mut s = self.lock();
        if s.repos.contains_key(repo) {
            return Err(HostError::Invalid(format!("repository {repo} already exists")));
        }
        s.repos.insert(
            repo.to_string(),
            SimRepo {
                next_number: 1,
                contributors: contributors.iter().map(|c| c.to_string()).collect(),
                ..Default::default()
            },
        );
        Ok(())
    }

    /// Creates `<user>/ossdoorway-sandbox` with one instructions issue per
    /// quest, in catalog order. Returns the repo name and the quest issues.
    pub fn provision_sandbox(
        &self,
        user: &str,
        catalog: &QuestCatalog,
    ) -> Result<(String, BTreeMap<String, u64>), HostError> {
        let repo = format!("{user}/{SANDBOX_REPO_NAME}");
        self.create_repo(&repo, &SANDBOX_CONTRIBUTORS)?;
        let mut issues = BTreeMap::new();
        for (qi, quest) in catalog.quests.iter().enumerate() {
            let (title, body) = render_quest_issue(qi, quest);
            issues.insert(quest.id.clone(), self.create_issue(&repo, &title, &body)?);
        }
        Ok((repo, issues))
    }

    pub fn comment_as(&self, actor: &str, repo: &str, issue: u64, body: &str) -> Result<RawDelivery, HostError> {
        self.lock().comment(actor, repo, issue, body)
    }

    pub fn assign_as(&self, actor: &str, repo: &str, issue: u64, assignee: &str) -> Result<RawDelivery, HostError> {
        let mut s = self.lock();
        let now = s.tick();
        let r = s.repo_mut(repo)?;
        let entry = r
            .issues
            .get_mut(&issue)
            .ok_or_else(|| not_found(format!("issue #{issue}")))?;
        if !entry.assignees.iter().any(|a| a == assignee) {
            entry.assignees.push(assignee.to_string());
        }
        let assignees: Vec<Value> = entry.assignees.iter().map(|a| json!({"login": a})).collect();
        let title = entry.title.clone();
        Ok(s.emit(
            "issues",
            json!({
                "action": "assigned",
                "issue": {"number": issue, "title": title, "assignees": assignees, "updated_at": now},
                "assignee": {"login": assignee},
                "repository": {"full_name": repo},
                "sender": {"login": actor},
            }),
        ))
    }

    pub fn open_pr_as(&self, actor: &str, repo: &str, title: &str, body: &str) -> Result<RawDelivery, HostError> {
        let mut s = self.lock();
        let now = s.tick();
        let r = s.repo_mut(repo)?;
        let number = r.next_number;
        r.next_number += 1;
        r.pulls.insert(
            number,
            SimPull {
                author: actor.to_string(),
            },
        );
        Ok(s.emit(
            "pull_request",
            json!({
                "action": "opened",
                "number": number,
                "pull_request": {
                    "number": number,
                    "title": title,
                    "body": body,
                    "created_at": now,
                    "user": {"login": actor},
                },
                "repository": {"full_name": repo},
                "sender": {"login": actor},
            }),
        ))
    }

    pub fn close_issue_as(&self, actor: &str, repo: &str, issue: u64) -> Result<RawDelivery, HostError> {
        let mut s = self.lock();
        let now = s.tick();
        let r = s.repo_mut(repo)?;
        let entry = r
            .issues
            .get_mut(&issue)
            .ok_or_else(|| not_found(format!("issue #{issue}")))?;
        entry.state = IssueState::Closed;
        let title = entry.title.clone();
        Ok(s.emit(
            "issues",
            json!({
                "action": "closed",
                "issue": {"number": issue, "title": title, "state": "closed", "closed_at": now, "updated_at": now},
                "repository": {"full_name": repo},
                "sender": {"login": actor},
            }),
        ))
    }

    pub fn fork_as(&self, actor: &str, repo: &str) -> Result<RawDelivery, HostError> {
        let mut s = self.lock();
        let now = s.tick();
        let r = s.repo_mut(repo)?;
        r.forks.insert(actor.to_string());
        let name = repo.rsplit('/').next().unwrap_or(repo);
        Ok(s.emit(
            "fork",
            json!({
                "forkee": {
                    "full_name": format!("{actor}/{name}"),
                    "owner": {"login": actor},
                    "created_at": now,
                },
                "repository": {"full_name": repo},
                "sender": {"login": actor},
            }),
        ))
    }

    /// Drains every delivery emitted since the last call, oldest first.
    pub fn take_deliveries(&self) -> Vec<RawDelivery> {
        std::mem::take(&mut self.lock().sink)
    }

    pub fn comments(&self, repo: &str, issue: u64) -> Vec<SimComment> {
        self.lock()
            .repos
            .get(repo)
            .and_then(|r| r.issues.get(&issue))
            .map(|i| i.comments.clone())
            .unwrap_or_default()
    }

    pub fn pull_request_author(&self, repo: &str, number: u64) -> Option<String> {
        let s = self.lock();
        s.repos.get(repo)?.pulls.get(&number).map(|p| p.author.clone())
    }

    /// Makes every later write to `repo` fail with a permission error.
    pub fn deny_writes(&self, repo: &str, denied: bool) -> Result<(), HostError> {
        self.lock().repo_mut(repo)?.writes_denied = denied;
        Ok(())
    }

    /// Makes the next `n` outbound client calls fail with a transport error.
    pub fn fail_next_transport(&self, n: u32) {
        self.lock().transport_failures = n;
    }
}

impl HostingClient for SimulatedHost {
    fn put_file(&self, repo: &str, path: &str, content: &str, _message: &str) -> Result<(), HostError> {
        let mut s = self.lock();
        s.outbound_check()?;
        let r = s.repo_mut(repo)?;
        if r.writes_denied {
            return Err(HostError::Permission(format!("write access to {repo} denied")));
        }
        r.files.insert(path.to_string(), content.to_string());
        Ok(())
    }

    fn get_file(&self, repo: &str, path: &str) -> Result<Option<String>, HostError> {
        let mut s = self.lock();
        s.outbound_check()?;
        Ok(s.repo(repo)?.files.get(path).cloned())
    }

    /// Opens an issue as the bot. Issue creation is not a subscribed event,
    /// so no delivery is emitted.
    fn create_issue(&self, repo: &str, title: &str, body: &str) -> Result<u64, HostError> {
        let mut s = self.lock();
        s.outbound_check()?;
        let bot = s.bot_login.clone();
        s.tick();
        let r = s.repo_mut(repo)?;
        if r.writes_denied {
            return Err(HostError::Permission(format!("write access to {repo} denied")));
        }
        let number = r.next_number;
        r.next_number += 1;
        r.issues.insert(
            number,
            SimIssue {
                title: title.to_string(),
                state: IssueState::Open,
                assignees: Vec::new(),
                comments: vec![SimComment {
                    author: bot,
                    body: body.to_string(),
                }],
            },
        );
        Ok(number)
    }

    fn post_comment(&self, repo: &str, issue: u64, markdown: &str) -> Result<(), HostError> {
        let mut s = self.lock();
        s.outbound_check()?;
        if s.repo(repo)?.writes_denied {
            return Err(HostError::Permission(format!("write access to {repo} denied")));
        }
        let bot = s.bot_login.clone();
        s.comment(&bot, repo, issue, markdown).map(|_| ())
    }

    fn repo_view(&self, repo: &str) -> Result<RepoSnapshot, HostError> {
        let mut s = self.lock();
        s.outbound_check()?;
        let r = s.repo(repo)?;
        Ok(RepoSnapshot {
            contributors: r.contributors.clone(),
            fork_owners: r.forks.clone(),
            issues: r
                .issues
                .iter()
                .map(|(n, i)| {
                    (
                        *n,
                        IssueSnapshot {
                            state: i.state,
                            assignees: i.assignees.clone(),
                        },
                    )
                })
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::default_catalog;
    use crate::gateway::publish_dashboard;
    use crate::verification::{EventKind, RepoView};

    fn sandbox() -> (SimulatedHost, String, BTreeMap<String, u64>) {
        let host = SimulatedHost::default();
        let (repo, issues) = host.provision_sandbox("alice", &default_catalog()).unwrap();
        (host, repo, issues)
    }

    fn event_of(d: &RawDelivery) -> crate::verification::ActivityEvent {
        match d.normalize().unwrap() {
            Normalized::Event(e) => e,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn provisioning_creates_quest_issues() {
        let (host, repo, issues) = sandbox();
        assert_eq!(repo, "alice/ossdoorway-sandbox");
        assert_eq!(issues.values().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(host.comments(&repo, 1)[0].body.contains("Explore the issue tracker"));
        assert!(host.take_deliveries().is_empty());
    }

    #[test]
    fn learner_actions_normalize() {
        let (host, repo, _) = sandbox();
        let c = event_of(&host.comment_as("alice", &repo, 2, "hi @octo-dev").unwrap());
        assert_eq!(
            (c.kind, c.issue_number, c.mentions.clone()),
            (EventKind::IssueComment, Some(2), vec!["octo-dev".to_string()])
        );
        let a = event_of(&host.assign_as("alice", &repo, 2, "alice").unwrap());
        assert_eq!(a.assignee.as_deref(), Some("alice"));
        let p = event_of(&host.open_pr_as("alice", &repo, "Fix docs", "Fixes #3").unwrap());
        assert_eq!(
            (p.kind, p.linked_issues.clone(), p.issue_number),
            (EventKind::PullRequestOpened, vec![3], Some(4))
        );
        assert_eq!(host.pull_request_author(&repo, 4).as_deref(), Some("alice"));
        let cl = event_of(&host.close_issue_as("alice", &repo, 3).unwrap());
        assert_eq!(cl.kind, EventKind::IssueClosed);
        let f = event_of(&host.fork_as("alice", &repo).unwrap());
        assert_eq!(f.kind, EventKind::ForkCreated);
        for e in [&c, &a, &p, &cl, &f] {
            e.validate().unwrap();
        }
        // timestamps strictly increase, ids are sequential
        let all = host.take_deliveries();
        assert_eq!(all.len(), 5);
        assert_eq!(all[0].delivery_id, "sim-000001");
        assert!(c.timestamp < a.timestamp && a.timestamp < f.timestamp);

        let view = host.repo_view(&repo).unwrap();
        assert!(view.fork_exists("alice"));
        assert_eq!(view.issue_state(3), Some(IssueState::Closed));
        assert_eq!(view.issue_assignees(2), vec!["alice"]);
    }

    #[test]
    fn bot_comments_are_emitted_too() {
        let (host, repo, _) = sandbox();
        host.post_comment(&repo, 1, "hello").unwrap();
        let d = host.take_deliveries();
        assert_eq!(event_of(&d[0]).actor, "ossdoorway-bot");
    }

    #[test]
    fn publish_round_trip_and_last_writer_wins() {
        let (host, repo, _) = sandbox();
        publish_dashboard(&host, &repo, "# one\n").unwrap();
        assert_eq!(host.get_file(&repo, "README.md").unwrap().as_deref(), Some("# one\n"));
        publish_dashboard(&host, &repo, "# two\n").unwrap();
        assert_eq!(host.get_file(&repo, "README.md").unwrap().as_deref(), Some("# two\n"));
        assert!(matches!(
            publish_dashboard(&host, &repo, ""),
            Err(HostError::Invalid(_))
        ));
    }

    #[test]
    fn injected_failures_are_distinct() {
        let (host, repo, _) = sandbox();
        host.deny_writes(&repo, true).unwrap();
        assert!(matches!(
            publish_dashboard(&host, &repo, "x"),
            Err(HostError::Permission(_))
        ));
        host.deny_writes(&repo, false).unwrap();
        host.fail_next_transport(1);
        let err = publish_dashboard(&host, &repo, "x").unwrap_err();
        assert!(err.is_retryable());
        assert!(publish_dashboard(&host, &repo, "x").is_ok());
    }
}
