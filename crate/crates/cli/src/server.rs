//! HTTP front end: webhook intake and health probe.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::Router;
use ossdoorway::gateway::{ingest, IngestError, Normalized, WebhookRequest};
use ossdoorway::service::{DispatchError, Dispatcher};
use ossdoorway::VERSION;

pub struct AppState {
    pub secret: Vec<u8>,
    pub dispatcher: Arc<Dispatcher>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/webhook", post(webhook))
        .route("/healthz", get(healthz))
        .with_state(state)
}

async fn healthz() -> String {
    format!("ok ossdoorway {VERSION}\n")
}

fn header(headers: &HeaderMap, name: &str) -> String {
    headers
        .get(name)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_string()
}

/// 204 once the event is queued (or deliberately dropped), 401 for a bad
/// signature, 400 for an unreadable delivery, 503 when the learner's queue
/// is full or the service is shutting down.
async fn webhook(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> (StatusCode, String) {
    let request = WebhookRequest {
        event_name: header(&headers, "x-github-event"),
        delivery_id: header(&headers, "x-github-delivery"),
        signature: header(&headers, "x-hub-signature-256"),
        body: body.to_vec(),
    };
    match ingest(&state.secret, &request) {
        Err(IngestError::BadSignature) => {
            log::warn!("rejected delivery {:?}: bad signature", request.delivery_id);
            (StatusCode::UNAUTHORIZED, "bad signature\n".into())
        }
        Err(e @ IngestError::Malformed(_)) => {
            log::warn!("rejected delivery {:?}: {e}", request.delivery_id);
            (StatusCode::BAD_REQUEST, format!("{e}\n"))
        }
        Ok(Normalized::Unsupported { event_name, action }) => {
            log::debug!("ignoring {event_name} {action:?}");
            (StatusCode::NO_CONTENT, String::new())
        }
        Ok(Normalized::Event(event)) => match state.dispatcher.try_submit(event) {
            Ok(()) => (StatusCode::NO_CONTENT, String::new()),
            Err(DispatchError::Full) => {
                log::warn!("queue full, asking sender to redeliver {}", request.delivery_id);
                (StatusCode::SERVICE_UNAVAILABLE, "queue full\n".into())
            }
            Err(DispatchError::Closed) => (StatusCode::SERVICE_UNAVAILABLE, "shutting down\n".into()),
        },
    }
}
