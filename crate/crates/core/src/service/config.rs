use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{default_catalog, load_catalog, CatalogError, QuestCatalog};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("catalog {path}: {source}")]
    Catalog { path: PathBuf, source: CatalogError },
    #[error("data directory {path} is not writable: {source}")]
    DataDir { path: PathBuf, source: std::io::Error },
    #[error("environment variable {0} is not set")]
    MissingEnv(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum HostingMode {
    /// In-memory platform; nothing leaves the process.
    Simulated,
    Live {
        #[serde(default = "default_base_url")]
        base_url: String,
        /// Environment variable holding the installation token.
        #[serde(default = "default_token_env")]
        token_env: String,
    },
}

fn default_base_url() -> String {
    "https://api.github.com".into()
}

fn default_token_env() -> String {
    "GITHUB_TOKEN".into()
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_secret_env() -> String {
    "WEBHOOK_SECRET".into()
}

fn default_bot_login() -> String {
    "ossdoorway-bot".into()
}

fn default_log_level() -> String {
    "info".into()
}

fn default_workers() -> usize {
    4
}

fn default_queue_capacity() -> usize {
    256
}

fn default_hosting() -> HostingMode {
    HostingMode::Simulated
}

/// Service configuration file. Relative paths are resolved against the
/// directory containing the file.
///
/// ```toml
/// catalog_path = "catalog.toml"   # optional, built-in curriculum otherwise
/// data_dir = "data"
/// listen_address = "127.0.0.1:8080"
/// secret_env = "WEBHOOK_SECRET"
/// bot_login = "ossdoorway-bot"
/// log_level = "info"
///
/// [hosting]
/// mode = "live"                    # or "simulated"
/// base_url = "https://api.github.com"
/// token_env = "GITHUB_TOKEN"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub catalog_path: Option<PathBuf>,
    pub data_dir: PathBuf,
    #[serde(default = "default_listen")]
    pub listen_address: String,
    #[serde(default = "default_secret_env")]
    pub secret_env: String,
    #[serde(default = "default_bot_login")]
    pub bot_login: String,
    #[serde(default = "default_log_level")]
    pub log_level: String,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
    #[serde(default = "default_hosting")]
    pub hosting: HostingMode,
}

const LOG_LEVELS: [&str; 6] = ["off", "error", "warn", "info", "debug", "trace"];

impl ServiceConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: ServiceConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: base_dir.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(p) = &config.catalog_path {
            config.catalog_path = Some(base_dir.join(p));
        }
        config.data_dir = base_dir.join(&config.data_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !LOG_LEVELS.contains(&self.log_level.to_ascii_lowercase().as_str()) {
            return Err(ConfigError::Invalid(format!(
                "log_level must be one of {}, got `{}`",
                LOG_LEVELS.join(", "),
                self.log_level
            )));
        }
        if self.workers == 0 || self.queue_capacity == 0 {
            return Err(ConfigError::Invalid(
                "workers and queue_capacity must be positive".into(),
            ));
        }
        if self.secret_env.is_empty() || self.bot_login.is_empty() {
            return Err(ConfigError::Invalid(
                "secret_env and bot_login must not be empty".into(),
            ));
        }
        Ok(())
    }

    /// The configured catalog, or the built-in curriculum.
    pub fn load_catalog(&self) -> Result<QuestCatalog, ConfigError> {
        match &self.catalog_path {
            None => Ok(default_catalog()),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                load_catalog(&text).map_err(|source| ConfigError::Catalog {
                    path: path.clone(),
                    source,
                })
            }
        }
    }

    /// Creates `data_dir` if needed and checks that it accepts writes.
    pub fn prepare_data_dir(&self) -> Result<(), ConfigError> {
        let err = |source| ConfigError::DataDir {
            path: self.data_dir.clone(),
            source,
        };
        fs::create_dir_all(&self.data_dir).map_err(err)?;
        let probe = self.data_dir.join(".write-probe");
        fs::write(&probe, b"ok").map_err(err)?;
        fs::remove_file(&probe).map_err(err)?;
        Ok(())
    }

    /// Reads the webhook secret from the configured environment variable.
    pub fn webhook_secret(&self) -> Result<Vec<u8>, ConfigError> {
        read_env(&self.secret_env).map(String::into_bytes)
    }
}

pub fn read_env(name: &str) -> Result<String, ConfigError> {
    match std::env::var(name) {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(ConfigError::MissingEnv(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ServiceConfig::parse("data_dir = \"state\"\n", Path::new("/srv/od")).unwrap();
        assert_eq!(c.data_dir, PathBuf::from("/srv/od/state"));
        assert_eq!(c.secret_env, "WEBHOOK_SECRET");
        assert_eq!(c.hosting, HostingMode::Simulated);
        assert_eq!(c.load_catalog().unwrap().total_tasks(), 12);
    }

    #[test]
    fn live_hosting() {
        let text = "data_dir = \"d\"\ncatalog_path = \"c.toml\"\n[hosting]\nmode = \"live\"\ntoken_env = \"TOK\"\n";
        let c = ServiceConfig::parse(text, Path::new("/etc")).unwrap();
        assert_eq!(c.catalog_path, Some(PathBuf::from("/etc/c.toml")));
        assert_eq!(
            c.hosting,
            HostingMode::Live {
                base_url: "https://api.github.com".into(),
                token_env: "TOK".into()
            }
        );
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(
            ServiceConfig::parse("", Path::new(".")),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            ServiceConfig::parse("data_dir = \"d\"\nlog_level = \"loud\"\n", Path::new(".")),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ServiceConfig::parse("data_dir = \"d\"\nport = 1\n", Path::new(".")),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn missing_env_names_variable() {
        let err = read_env("OSSDOORWAY_TEST_SURELY_UNSET").unwrap_err();
        assert!(err.to_string().contains("OSSDOORWAY_TEST_SURELY_UNSET"));
    }

    #[test]
    fn data_dir_probe() {
        let dir = tempfile::tempdir().unwrap();
        let c = ServiceConfig::parse("data_dir = \"nested/data\"\n", dir.path()).unwrap();
        c.prepare_data_dir().unwrap();
        assert!(dir.path().join("nested/data").is_dir());
    }
}
