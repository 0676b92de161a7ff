//! REST client for the live hosting platform.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use ossdoorway::gateway::{HostError, HostingClient};
use ossdoorway::verification::{IssueSnapshot, IssueState, RepoSnapshot};
use reqwest::blocking::{Client, RequestBuilder, Response};
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};

const PAGE_SIZE: usize = 100;
const MAX_PAGES: usize = 10;

/// Blocking client for the GitHub REST API, authenticated with an
/// installation or personal token.
///
/// Must be built and dropped outside of an async runtime.
pub struct GithubClient {
    http: Client,
    base_url: String,
    token: String,
}

impl GithubClient {
    pub fn new(base_url: &str, token: &str) -> Result<Self, HostError> {
        let http = Client::builder()
            .user_agent(concat!("ossdoorway/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| HostError::Transport(e.to_string()))?;
        Ok(GithubClient {
            http,
            base_url: base_url.trim_end_matches('/').to_string(),
            token: token.to_string(),
        })
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http
            .request(method, format!("{}{}", self.base_url, path))
            .bearer_auth(&self.token)
            .header("Accept", "application/vnd.github+json")
            .header("X-GitHub-Api-Version", "2022-11-28")
    }

    fn send(&self, req: RequestBuilder, what: &str) -> Result<Response, HostError> {
        let resp = req.send().map_err(|e| HostError::Transport(format!("{what}: {e}")))?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let body = resp.text().unwrap_or_default();
        Err(classify(status, &format!("{what}: {status} {}", body.trim())))
    }

    fn json(&self, req: RequestBuilder, what: &str) -> Result<Value, HostError> {
        self.send(req, what)?
            .json()
            .map_err(|e| HostError::Transport(format!("{what}: bad JSON: {e}")))
    }

    fn paged(&self, path: &str, query: &[(&str, &str)], what: &str) -> Result<Vec<Value>, HostError> {
        let mut out = Vec::new();
        for page in 1..=MAX_PAGES {
            let page = page.to_string();
            let per_page = PAGE_SIZE.to_string();
            let req = self
                .request(Method::GET, path)
                .query(query)
                .query(&[("per_page", per_page.as_str()), ("page", page.as_str())]);
            let items = match self.json(req, what)? {
                Value::Array(items) => items,
                _ => return Err(HostError::Invalid(format!("{what}: expected a JSON array"))),
            };
            let n = items.len();
            out.extend(items);
            if n < PAGE_SIZE {
                break;
            }
        }
        Ok(out)
    }

    fn file_sha(&self, repo: &str, path: &str) -> Result<Option<String>, HostError> {
        match self.contents(repo, path) {
            Ok(v) => Ok(v.get("sha").and_then(Value::as_str).map(str::to_string)),
            Err(HostError::NotFound(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn contents(&self, repo: &str, path: &str) -> Result<Value, HostError> {
        let req = self.request(Method::GET, &format!("/repos/{repo}/contents/{path}"));
        self.json(req, &format!("get {repo}/{path}"))
    }

    fn put_once(&self, repo: &str, path: &str, content: &str, message: &str) -> Result<(), HostError> {
        let mut body = json!({ "message": message, "content": STANDARD.encode(content) });
        if let Some(sha) = self.file_sha(repo, path)? {
            body["sha"] = Value::String(sha);
        }
        let req = self
            .request(Method::PUT, &format!("/repos/{repo}/contents/{path}"))
            .json(&body);
        self.send(req, &format!("put {repo}/{path}")).map(drop)
    }
}

fn classify(status: StatusCode, message: &str) -> HostError {
    let message = message.to_string();
    match status {
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => HostError::Permission(message),
        StatusCode::NOT_FOUND => HostError::NotFound(message),
        StatusCode::TOO_MANY_REQUESTS => HostError::Transport(message),
        s if s.is_server_error() => HostError::Transport(message),
        _ => HostError::Invalid(message),
    }
}

fn login(v: &Value) -> Option<String> {
    v.get("login").and_then(Value::as_str).map(str::to_string)
}

impl HostingClient for GithubClient {
    fn put_file(&self, repo: &str, path: &str, content: &str, message: &str) -> Result<(), HostError> {
        match self.put_once(repo, path, content, message) {
            Err(HostError::Invalid(m)) if m.contains("409") || m.contains("422") => {
                self.put_once(repo, path, content, message)
            }
            other => other,
        }
    }

    fn get_file(&self, repo: &str, path: &str) -> Result<Option<String>, HostError> {
        let v = match self.contents(repo, path) {
            Ok(v) => v,
            Err(HostError::NotFound(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let encoded: String = v
            .get("content")
            .and_then(Value::as_str)
            .ok_or_else(|| HostError::Invalid(format!("{repo}/{path} is not a file")))?
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect();
        let bytes = STANDARD
            .decode(encoded)
            .map_err(|e| HostError::Invalid(format!("{repo}/{path}: {e}")))?;
        String::from_utf8(bytes)
            .map(Some)
            .map_err(|_| HostError::Invalid(format!("{repo}/{path} is not UTF-8")))
    }

    fn create_issue(&self, repo: &str, title: &str, body: &str) -> Result<u64, HostError> {
        let req = self
            .request(Method::POST, &format!("/repos/{repo}/issues"))
            .json(&json!({ "title": title, "body": body }));
        let v = self.json(req, &format!("create issue in {repo}"))?;
        v.get("number")
            .and_then(Value::as_u64)
            .ok_or_else(|| HostError::Invalid("created issue has no number".into()))
    }

    fn post_comment(&self, repo: &str, issue: u64, markdown: &str) -> Result<(), HostError> {
        let req = self
            .request(Method::POST, &format!("/repos/{repo}/issues/{issue}/comments"))
            .json(&json!({ "body": markdown }));
        self.send(req, &format!("comment on {repo}#{issue}")).map(drop)
    }

    fn repo_view(&self, repo: &str) -> Result<RepoSnapshot, HostError> {
        let contributors = self
            .paged(&format!("/repos/{repo}/contributors"), &[], "list contributors")?
            .iter()
            .filter_map(login)
            .collect();
        let fork_owners: BTreeSet<String> = self
            .paged(&format!("/repos/{repo}/forks"), &[], "list forks")?
            .iter()
            .filter_map(|f| f.get("owner").and_then(login))
            .collect();
        let mut issues = BTreeMap::new();
        for issue in self.paged(&format!("/repos/{repo}/issues"), &[("state", "all")], "list issues")? {
            let Some(number) = issue.get("number").and_then(Value::as_u64) else {
                continue;
            };
            let state = match issue.get("state").and_then(Value::as_str) {
                Some("closed") => IssueState::Closed,
                _ => IssueState::Open,
            };
            let assignees = issue
                .get("assignees")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(login).collect())
                .unwrap_or_default();
            issues.insert(number, IssueSnapshot { state, assignees });
        }
        Ok(RepoSnapshot {
            contributors,
            fork_owners,
            issues,
        })
    }
}
