use std::thread;
use std::time::Duration;

use thiserror::Error;

use crate::verification::RepoSnapshot;

/// Repository path of the learner dashboard.
pub const DASHBOARD_PATH: &str = "README.md";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HostError {
    /// Network or server trouble; worth retrying.
    #[error("transport failure: {0}")]
    Transport(String),
    /// The token may not perform the operation; retrying will not help.
    #[error("permission denied: {0}")]
    Permission(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid request: {0}")]
    Invalid(String),
}

impl HostError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, HostError::Transport(_))
    }
}

/// Outbound operations against the code-hosting platform.
///
/// Two implementations exist: the live REST client in the CLI crate and
/// [`SimulatedHost`](super::SimulatedHost).
pub trait HostingClient: Send + Sync {
    /// Creates or replaces a file. Last writer wins.
    fn put_file(&self, repo: &str, path: &str, content: &str, message: &str) -> Result<(), HostError>;

    fn get_file(&self, repo: &str, path: &str) -> Result<Option<String>, HostError>;

    /// Opens an issue as the bot and returns its number.
    fn create_issue(&self, repo: &str, title: &str, body: &str) -> Result<u64, HostError>;

    fn post_comment(&self, repo: &str, issue: u64, markdown: &str) -> Result<(), HostError>;

    /// Snapshot of contributors, forks and issues for verification.
    fn repo_view(&self, repo: &str) -> Result<RepoSnapshot, HostError>;
}

/// Retries retryable failures with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests and simulations.
    pub fn immediate() -> Self {
        RetryPolicy {
            initial_backoff: Duration::ZERO,
            ..Self::default()
        }
    }

    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, HostError>) -> Result<T, HostError> {
        let mut backoff = self.initial_backoff;
        let mut retries = 0;
        loop {
            match op() {
                Err(e) if e.is_retryable() && retries < self.max_retries => {
                    log::warn!("retrying after {e} (attempt {})", retries + 1);
                    if !backoff.is_zero() {
                        thread::sleep(backoff);
                    }
                    backoff *= 2;
                    retries += 1;
                }
                other => return other,
            }
        }
    }
}

/// Writes the dashboard markdown to the repository README.
pub fn publish_dashboard(client: &dyn HostingClient, repo: &str, markdown: &str) -> Result<(), HostError> {
    if markdown.is_empty() {
        return Err(HostError::Invalid("dashboard markdown is empty".into()));
    }
    client.put_file(repo, DASHBOARD_PATH, markdown, "Update OSSDoorway progress dashboard")
}
