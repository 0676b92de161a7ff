use std::sync::Arc;

use ossdoorway::gateway::{HostError, HostingClient, SimulatedHost, SANDBOX_CONTRIBUTORS, SANDBOX_REPO_NAME};
use ossdoorway::verification::RepoSnapshot;
use ossdoorway::QuestCatalog;

/// In-memory host for `serve` in simulated mode. A learner's sandbox
/// repository, with its quest issues, appears the first time it is touched,
/// so issue numbers line up with those handed out at enrollment. Webhook
/// deliveries the host would emit are discarded.
pub struct OnDemandSandbox {
    inner: SimulatedHost,
    catalog: Arc<QuestCatalog>,
}

impl OnDemandSandbox {
    pub fn new(bot_login: &str, catalog: Arc<QuestCatalog>) -> Self {
        OnDemandSandbox {
            inner: SimulatedHost::new(bot_login),
            catalog,
        }
    }

    pub fn host(&self) -> &SimulatedHost {
        &self.inner
    }

    fn ensure(&self, repo: &str) -> Result<(), HostError> {
        self.inner.take_deliveries();
        match self.inner.repo_view(repo) {
            Err(HostError::NotFound(_)) => {}
            other => return other.map(drop),
        }
        let created = match repo.split_once('/') {
            Some((owner, name)) if name == SANDBOX_REPO_NAME => {
                self.inner.provision_sandbox(owner, &self.catalog).map(drop)
            }
            _ => self.inner.create_repo(repo, &SANDBOX_CONTRIBUTORS),
        };
        match created {
            Err(HostError::Invalid(_)) => Ok(()),
            other => other,
        }
    }
}

impl HostingClient for OnDemandSandbox {
    fn put_file(&self, repo: &str, path: &str, content: &str, message: &str) -> Result<(), HostError> {
        self.ensure(repo)?;
        self.inner.put_file(repo, path, content, message)
    }

    fn get_file(&self, repo: &str, path: &str) -> Result<Option<String>, HostError> {
        self.ensure(repo)?;
        self.inner.get_file(repo, path)
    }

    fn create_issue(&self, repo: &str, title: &str, body: &str) -> Result<u64, HostError> {
        self.ensure(repo)?;
        self.inner.create_issue(repo, title, body)
    }

    fn post_comment(&self, repo: &str, issue: u64, markdown: &str) -> Result<(), HostError> {
        self.ensure(repo)?;
        self.inner.post_comment(repo, issue, markdown)
    }

    fn repo_view(&self, repo: &str) -> Result<RepoSnapshot, HostError> {
        self.ensure(repo)?;
        self.inner.repo_view(repo)
    }
}
