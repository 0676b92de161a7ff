//! Boundary to the code-hosting platform.
//!
//! Inbound: webhook signature checks and normalization of raw webhook
//! documents into [`ActivityEvent`](crate::verification::ActivityEvent)s.
//! Outbound: the [`HostingClient`] interface the service writes against, and
//! [`SimulatedHost`], a complete in-memory implementation used for tests and
//! offline sessions.

mod host;
mod normalize;
mod signature;
mod simulated;

pub use host::{publish_dashboard, HostError, HostingClient, RetryPolicy, DASHBOARD_PATH};
pub use normalize::{ingest, normalize_event, IngestError, NormalizeError, Normalized, WebhookRequest};
pub use signature::{sign, verify_signature};
pub use simulated::{RawDelivery, SimComment, SimulatedHost, SANDBOX_CONTRIBUTORS, SANDBOX_REPO_NAME};
