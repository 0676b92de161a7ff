//! The running service: configuration, the per-event pipeline, the
//! learner-partitioned worker pool and the offline session simulator.

mod config;
mod dispatcher;
mod engine;
mod simulate;

pub use config::{read_env, ConfigError, HostingMode, ServiceConfig};
pub use dispatcher::{partition_for, DispatchError, Dispatcher, SummarySink};
pub use engine::{Disposition, Engine, EngineError, EngineSettings, ProcessingSummary};
pub use simulate::{
    simulate_session, ActionKind, Expectation, ScriptAction, SessionScript, SimulationError, StepRecord, Transcript,
};

/// Session scripts shipped with the crate.
pub mod scripts {
    /// All twelve tasks answered correctly, in order.
    pub const FULL_RUN: &str = include_str!("../../assets/scripts/full_run.toml");
    /// A wrong answer followed by its correction.
    pub const ONE_MISTAKE: &str = include_str!("../../assets/scripts/one_mistake.toml");
}
