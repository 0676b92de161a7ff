use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ossdoorway::analytics::{summarize, QuestionnaireDataset, StatsError};
use ossdoorway::gateway::{HostingClient, SimulatedHost, SANDBOX_CONTRIBUTORS, SANDBOX_REPO_NAME};
use ossdoorway::renderer::render_dashboard;
use ossdoorway::service::{
    read_env, simulate_session, ConfigError, Dispatcher, Engine, EngineError, EngineSettings, HostingMode,
    ServiceConfig, SessionScript, SimulationError,
};
use ossdoorway::store::{FileStore, StoreError};
use ossdoorway::{default_catalog, QuestCatalog};

use crate::github::GithubClient;
use crate::sandbox::OnDemandSandbox;
use crate::server::{router, AppState};

/// A failed command, carrying its process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments. Exit status 1.
    Usage(String),
    /// Input files, configuration or environment rejected. Exit status 2.
    Validation(String),
    /// The command ran and failed. Exit status 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Store(StoreError::InvalidKey(k)) => CliError::Validation(format!("invalid login `{k}`")),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn init_logging(default_level: &str) {
    let env = env_logger::Env::default().default_filter_or(default_level);
    let _ = env_logger::Builder::from_env(env).format_timestamp_millis().try_init();
}

fn settings(config: &ServiceConfig) -> EngineSettings {
    EngineSettings {
        bot_login: config.bot_login.clone(),
        ..Default::default()
    }
}

fn open_store(config: &ServiceConfig, catalog: Arc<QuestCatalog>) -> Result<Arc<FileStore>, CliError> {
    config.prepare_data_dir()?;
    FileStore::open(&config.data_dir, catalog)
        .map(Arc::new)
        .map_err(runtime)
}

fn live_client(base_url: &str, token_env: &str) -> Result<Arc<dyn HostingClient>, CliError> {
    let token = read_env(token_env)?;
    Ok(Arc::new(GithubClient::new(base_url, &token).map_err(runtime)?))
}

/// Runs the webhook service until SIGINT or SIGTERM, then drains the queue.
pub fn serve(config_path: &Path) -> Result<(), CliError> {
    let config = ServiceConfig::load(config_path)?;
    init_logging(&config.log_level);
    let secret = config.webhook_secret()?;
    let catalog = Arc::new(config.load_catalog()?);
    let store = open_store(&config, catalog.clone())?;
    let host: Arc<dyn HostingClient> = match &config.hosting {
        HostingMode::Simulated => {
            log::warn!("hosting mode is simulated: outbound writes stay in memory");
            Arc::new(OnDemandSandbox::new(&config.bot_login, catalog.clone()))
        }
        HostingMode::Live { base_url, token_env } => live_client(base_url, token_env)?,
    };
    let engine = Arc::new(Engine::new(catalog, host, store, settings(&config)));
    let dispatcher = Arc::new(Dispatcher::start(engine, config.workers, config.queue_capacity, None));

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(runtime)?;
    let state = Arc::new(AppState {
        secret,
        dispatcher: dispatcher.clone(),
    });
    let served = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.listen_address)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot listen on {}: {e}", config.listen_address)))?;
        let addr = listener.local_addr().map_err(runtime)?;
        log::info!("ossdoorway {} listening on {addr}", ossdoorway::VERSION);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(runtime)
    });
    drop(rt);
    log::info!("draining queued events");
    dispatcher.shutdown();
    log::info!("stopped");
    served
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(e) => {
                log::error!("cannot install SIGTERM handler: {e}");
                std::future::pending::<()>().await
            }
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    log::info!("shutdown requested");
}

/// Creates the learner's quest issues and first dashboard.
///
/// In simulated mode the sandbox repository lives only for the duration of
/// the command; the saved progress document is the lasting result.
pub fn enroll(user: &str, config_path: &Path) -> Result<String, CliError> {
    let config = ServiceConfig::load(config_path)?;
    init_logging(&config.log_level);
    let catalog = Arc::new(config.load_catalog()?);
    let store = open_store(&config, catalog.clone())?;
    let repo = format!("{user}/{SANDBOX_REPO_NAME}");
    let host: Arc<dyn HostingClient> = match &config.hosting {
        HostingMode::Simulated => {
            let sim = SimulatedHost::new(&config.bot_login);
            sim.create_repo(&repo, &SANDBOX_CONTRIBUTORS).map_err(runtime)?;
            Arc::new(sim)
        }
        HostingMode::Live { base_url, token_env } => live_client(base_url, token_env)?,
    };
    let engine = Engine::new(catalog.clone(), host, store, settings(&config));
    if let Some(existing) = engine.store().load_progress(user).map_err(EngineError::from)? {
        return Ok(format!(
            "{user} is already enrolled ({} of {} tasks complete)\n",
            existing.completed.len(),
            catalog.total_tasks()
        ));
    }
    let state = engine.enroll(user, &repo)?;
    let mut out = format!("enrolled {user} in {repo}\n");
    for quest in &catalog.quests {
        if let Some(n) = state.quest_issue(&quest.id) {
            out.push_str(&format!("  issue #{n}: {}\n", quest.title));
        }
    }
    out.push('\n');
    out.push_str(&render_dashboard(&state, &catalog));
    Ok(out)
}

/// Replays a session script offline. Fails when any step's outcome differs
/// from its `expect` annotation.
pub fn simulate(script_path: &Path, config_path: Option<&Path>) -> Result<String, CliError> {
    let (catalog, bot_login) = match config_path {
        Some(p) => {
            let config = ServiceConfig::load(p)?;
            (config.load_catalog()?, config.bot_login)
        }
        None => (default_catalog(), EngineSettings::default().bot_login),
    };
    init_logging("warn");
    let text = fs::read_to_string(script_path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", script_path.display())))?;
    let script = SessionScript::parse(&text).map_err(|e| CliError::Validation(e.to_string()))?;
    let transcript = simulate_session(&script, Arc::new(catalog), &bot_login).map_err(|e| match e {
        SimulationError::Parse(_) | SimulationError::InvalidAction { .. } => CliError::Validation(e.to_string()),
        other => runtime(other),
    })?;
    let text = transcript.to_text();
    match transcript.mismatches() {
        0 => Ok(text),
        n => {
            print!("{text}");
            Err(CliError::Runtime(format!(
                "{n} step(s) did not match their expected outcome"
            )))
        }
    }
}

/// Markdown summary of a pre/post questionnaire CSV.
pub fn report(dataset_path: &Path, segment: &str) -> Result<String, CliError> {
    init_logging("warn");
    let text = fs::read_to_string(dataset_path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", dataset_path.display())))?;
    let dataset = QuestionnaireDataset::from_csv(&text, segment)
        .map_err(|e| CliError::Validation(format!("{}: {e}", dataset_path.display())))?;
    match summarize(&dataset) {
        Ok(report) => Ok(report.to_markdown()),
        Err(e @ StatsError::NoPairedData) => Err(CliError::Validation(e.to_string())),
        Err(e) => Err(runtime(e)),
    }
}
