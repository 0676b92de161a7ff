use chrono::{DateTime, Utc};
use serde_json::Value;
use thiserror::Error;

use super::signature::verify_signature;
use crate::verification::{parse_issue_links, parse_mentions, ActivityEvent, EventKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("malformed `{event}` payload: {reason}")]
    MalformedPayload { event: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Event(ActivityEvent),
    /// An event or action outside the subscribed set; acknowledged and dropped.
    Unsupported {
        event_name: String,
        action: Option<String>,
    },
}

/// A raw inbound webhook delivery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WebhookRequest {
    /// `X-GitHub-Event`
    pub event_name: String,
    /// `X-GitHub-Delivery`
    pub delivery_id: String,
    /// `X-Hub-Signature-256`
    pub signature: String,
    /// Exactly the bytes that were signed.
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("webhook signature does not verify")]
    BadSignature,
    #[error("malformed webhook: {0}")]
    Malformed(String),
}

/// Verifies and normalizes one delivery. Maps onto HTTP 401 / 400 / 204.
pub fn ingest(secret: &[u8], request: &WebhookRequest) -> Result<Normalized, IngestError> {
    if !verify_signature(secret, &request.body, &request.signature) {
        return Err(IngestError::BadSignature);
    }
    if request.event_name.is_empty() || request.delivery_id.is_empty() {
        return Err(IngestError::Malformed("missing event name or delivery id".into()));
    }
    let payload: Value =
        serde_json::from_slice(&request.body).map_err(|e| IngestError::Malformed(format!("body is not JSON: {e}")))?;
    normalize_event(&request.event_name, &request.delivery_id, &payload)
        .map_err(|e| IngestError::Malformed(e.to_string()))
}

struct Fields<'a> {
    event: &'a str,
    payload: &'a Value,
}

impl<'a> Fields<'a> {
    fn err(&self, reason: impl Into<String>) -> NormalizeError {
        NormalizeError::MalformedPayload {
            event: self.event.to_string(),
            reason: reason.into(),
        }
    }

    fn lookup(&self, path: &str) -> Option<&'a Value> {
        path.split('.')
            .try_fold(self.payload, |v, key| v.get(key))
            .filter(|v| !v.is_null())
    }

    fn str(&self, path: &str) -> Result<&'a str, NormalizeError> {
        self.lookup(path)
            .and_then(Value::as_str)
            .ok_or_else(|| self.err(format!("missing string `{path}`")))
    }

    fn opt_str(&self, path: &str) -> Result<Option<&'a str>, NormalizeError> {
        match self.lookup(path) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| self.err(format!("`{path}` is not a string"))),
        }
    }

    fn number(&self, path: &str) -> Result<u64, NormalizeError> {
        self.lookup(path)
            .and_then(Value::as_u64)
            .ok_or_else(|| self.err(format!("missing number `{path}`")))
    }

    fn time(&self, paths: &[&str]) -> Result<DateTime<Utc>, NormalizeError> {
        let raw = paths
            .iter()
            .find_map(|p| self.lookup(p).and_then(Value::as_str))
            .ok_or_else(|| self.err(format!("missing timestamp `{}`", paths[0])))?;
        DateTime::parse_from_rfc3339(raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| self.err(format!("bad timestamp `{raw}`: {e}")))
    }
}

/// Maps a platform webhook document onto an [`ActivityEvent`].
///
/// Supported: `issue_comment/created`, `issues/assigned`, `issues/closed`,
/// `pull_request/opened` and `fork`. Everything else is
/// [`Normalized::Unsupported`].
pub fn normalize_event(event_name: &str, delivery_id: &str, payload: &Value) -> Result<Normalized, NormalizeError> {
    let f = Fields {
        event: event_name,
        payload,
    };
    let action = f.lookup("action").and_then(Value::as_str);
    let kind = match (event_name, action) {
        ("issue_comment", Some("created")) => EventKind::IssueComment,
        ("issues", Some("assigned")) => EventKind::IssueAssigned,
        ("issues", Some("closed")) => EventKind::IssueClosed,
        ("pull_request", Some("opened")) => EventKind::PullRequestOpened,
        ("fork", _) => EventKind::ForkCreated,
        _ => {
            return Ok(Normalized::Unsupported {
                event_name: event_name.to_string(),
                action: action.map(str::to_string),
            })
        }
    };
    if delivery_id.is_empty() {
        return Err(f.err("empty delivery id"));
    }

    let mut event = ActivityEvent {
        delivery_id: delivery_id.to_string(),
        kind,
        actor: f.str("sender.login")?.to_string(),
        repo: f.str("repository.full_name")?.to_string(),
        issue_number: None,
        body: None,
        assignee: None,
        mentions: Vec::new(),
        linked_issues: Vec::new(),
        timestamp: DateTime::UNIX_EPOCH,
    };

    match kind {
        EventKind::IssueComment => {
            event.issue_number = Some(f.number("issue.number")?);
            let body = f.str("comment.body")?;
            event.mentions = parse_mentions(body);
            event.body = Some(body.to_string());
            event.timestamp = f.time(&["comment.created_at"])?;
        }
        EventKind::IssueAssigned => {
            event.issue_number = Some(f.number("issue.number")?);
            event.assignee = Some(f.str("assignee.login")?.to_string());
            event.timestamp = f.time(&["issue.updated_at"])?;
        }
        EventKind::IssueClosed => {
            event.issue_number = Some(f.number("issue.number")?);
            event.timestamp = f.time(&["issue.closed_at", "issue.updated_at"])?;
        }
        EventKind::PullRequestOpened => {
            event.issue_number = Some(f.number("pull_request.number")?);
            let title = f.opt_str("pull_request.title")?.unwrap_or("");
            let body = f.opt_str("pull_request.body")?;
            let text = format!("{title}\n{}", body.unwrap_or(""));
            event.linked_issues = parse_issue_links(&text);
            if let Some(body) = body {
                event.mentions = parse_mentions(body);
                event.body = Some(body.to_string());
            }
            event.timestamp = f.time(&["pull_request.created_at"])?;
        }
        EventKind::ForkCreated => {
            event.timestamp = f.time(&["forkee.created_at"])?;
        }
    }
    Ok(Normalized::Event(event))
}
