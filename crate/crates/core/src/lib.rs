//! Webhook-driven quest engine that walks newcomers through their first
//! open-source contribution.
//!
//! The crate is split along the path an event takes through the system:
//!
//! - [`catalog`]: quests, tasks, verification specs and reward parameters.
//! - [`gateway`]: webhook signatures, payload normalization, the hosting
//!   client interface and an in-memory simulated host.
//! - [`verification`]: decides whether an event satisfies a task.
//! - [`progression`]: the pure game-state engine (XP, levels, badges, streaks).
//! - [`renderer`]: the markdown dashboard and bot feedback comments.
//! - [`store`]: learner progress documents and the delivery ledger.
//! - [`service`]: the event pipeline, worker pool and offline simulator.
//! - [`analytics`]: Likert questionnaire statistics (Wilcoxon, Mann-Whitney,
//!   Bonferroni).

pub mod analytics;
pub mod catalog;
pub mod gateway;
pub mod progression;
pub mod renderer;
pub mod service;
pub mod store;
pub mod verification;

pub use catalog::{default_catalog, load_catalog, QuestCatalog};
pub use progression::{level_for_xp, Award, Objective, ProgressState, Stats};
pub use verification::{verify, ActivityEvent, EventKind, RepoView, VerificationOutcome};

/// Version string reported by the CLI and the health probe.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
