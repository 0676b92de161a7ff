//! Learner progress persistence and the processed-delivery ledger.
//!
//! On-disk layout of [`FileStore`]:
//!
//! ```text
//! <data_dir>/progress/<login>   one pretty-printed JSON ProgressDocument per learner
//! <data_dir>/ledger             one "<delivery-id>\t<RFC 3339 time>" line per delivery
//! ```
//!
//! Progress documents are replaced atomically (write to a temp file, fsync,
//! rename). The ledger is append-only; a torn final line left by a crash is
//! discarded when the store is reopened.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::QuestCatalog;
use crate::progression::ProgressState;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("progress document for `{user}` is corrupt: {reason}")]
    Corrupt { user: String, reason: String },
    #[error("refusing to save invalid state: {0}")]
    InvalidState(String),
    #[error("invalid key `{0}`")]
    InvalidKey(String),
    #[error("storage failure: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryStatus {
    Fresh,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressDocument {
    pub schema_version: u32,
    pub updated_at: DateTime<Utc>,
    pub state: ProgressState,
}

pub trait ProgressStore: Send + Sync {
    /// The last saved state, or `None` for an unknown learner.
    fn load_progress(&self, user: &str) -> Result<Option<ProgressState>, StoreError>;

    /// Durably replaces the learner's document. Invalid states are rejected
    /// before storage is touched.
    fn save_progress(&self, state: &ProgressState) -> Result<(), StoreError>;

    /// Atomic check-and-set: `Fresh` exactly once per id.
    fn record_delivery(&self, delivery_id: &str) -> Result<DeliveryStatus, StoreError>;
}

fn check_login(user: &str) -> Result<(), StoreError> {
    let ok = !user.is_empty()
        && user.len() <= 64
        && !user.starts_with(['.', '-'])
        && user
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidKey(user.to_string()))
    }
}

fn check_delivery_id(id: &str) -> Result<(), StoreError> {
    if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(StoreError::InvalidKey(id.to_string()));
    }
    Ok(())
}

fn encode(state: &ProgressState, catalog: &QuestCatalog) -> Result<String, StoreError> {
    check_login(&state.user)?;
    state.check_invariants(catalog).map_err(StoreError::InvalidState)?;
    let doc = ProgressDocument {
        schema_version: SCHEMA_VERSION,
        updated_at: Utc::now(),
        state: state.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("document serializes");
    text.push('\n');
    Ok(text)
}

fn decode(user: &str, text: &str, catalog: &QuestCatalog) -> Result<ProgressState, StoreError> {
    let corrupt = |reason: String| StoreError::Corrupt {
        user: user.to_string(),
        reason,
    };
    let doc: ProgressDocument = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(corrupt(format!("unsupported schema version {}", doc.schema_version)));
    }
    if doc.state.user != user {
        return Err(corrupt(format!("document belongs to `{}`", doc.state.user)));
    }
    doc.state.check_invariants(catalog).map_err(corrupt)?;
    Ok(doc.state)
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// Volatile store with the same validation as [`FileStore`].
pub struct MemoryStore {
    catalog: Arc<QuestCatalog>,
    documents: Mutex<HashMap<String, String>>,
    ledger: Mutex<HashMap<String, DateTime<Utc>>>,
}

impl MemoryStore {
    pub fn new(catalog: Arc<QuestCatalog>) -> Self {
        MemoryStore {
            catalog,
            documents: Mutex::new(HashMap::new()),
            ledger: Mutex::new(HashMap::new()),
        }
    }

    /// Stores raw document text as-is, bypassing validation.
    pub fn insert_raw(&self, user: &str, text: &str) {
        lock(&self.documents).insert(user.to_string(), text.to_string());
    }

    pub fn delivery_count(&self) -> usize {
        lock(&self.ledger).len()
    }
}

impl ProgressStore for MemoryStore {
    fn load_progress(&self, user: &str) -> Result<Option<ProgressState>, StoreError> {
        let docs = lock(&self.documents);
        docs.get(user).map(|text| decode(user, text, &self.catalog)).transpose()
    }

    fn save_progress(&self, state: &ProgressState) -> Result<(), StoreError> {
        let text = encode(state, &self.catalog)?;
        lock(&self.documents).insert(state.user.clone(), text);
        Ok(())
    }

    fn record_delivery(&self, delivery_id: &str) -> Result<DeliveryStatus, StoreError> {
        check_delivery_id(delivery_id)?;
        let mut ledger = lock(&self.ledger);
        if ledger.contains_key(delivery_id) {
            return Ok(DeliveryStatus::Duplicate);
        }
        ledger.insert(delivery_id.to_string(), Utc::now());
        Ok(DeliveryStatus::Fresh)
    }
}

struct Ledger {
    file: File,
    ids: HashMap<String, String>,
}

/// Single-directory document store.
pub struct FileStore {
    catalog: Arc<QuestCatalog>,
    progress_dir: PathBuf,
    ledger: Mutex<Ledger>,
}

impl FileStore {
    pub fn open(data_dir: impl AsRef<Path>, catalog: Arc<QuestCatalog>) -> Result<Self, StoreError> {
        let data_dir = data_dir.as_ref();
        let progress_dir = data_dir.join("progress");
        fs::create_dir_all(&progress_dir)?;
        let ledger_path = data_dir.join("ledger");
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&ledger_path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            log::warn!("discarding torn ledger tail in {}", ledger_path.display());
            file.set_len(complete as u64)?;
            file.sync_all()?;
        }
        let ids = text[..complete]
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| {
                let (id, at) = l.split_once('\t').unwrap_or((l, ""));
                (id.to_string(), at.to_string())
            })
            .collect();
        Ok(FileStore {
            catalog,
            progress_dir,
            ledger: Mutex::new(Ledger { file, ids }),
        })
    }

    fn document_path(&self, user: &str) -> PathBuf {
        self.progress_dir.join(user)
    }

    /// Processing time recorded for a delivery, if it was seen.
    pub fn delivery_recorded_at(&self, delivery_id: &str) -> Option<String> {
        lock(&self.ledger).ids.get(delivery_id).cloned()
    }
}

impl ProgressStore for FileStore {
    fn load_progress(&self, user: &str) -> Result<Option<ProgressState>, StoreError> {
        check_login(user)?;
        match fs::read_to_string(self.document_path(user)) {
            Ok(text) => decode(user, &text, &self.catalog).map(Some),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) if e.kind() == io::ErrorKind::InvalidData => Err(StoreError::Corrupt {
                user: user.to_string(),
                reason: e.to_string(),
            }),
            Err(e) => Err(e.into()),
        }
    }

    fn save_progress(&self, state: &ProgressState) -> Result<(), StoreError> {
        let text = encode(state, &self.catalog)?;
        let target = self.document_path(&state.user);
        let tmp = self.progress_dir.join(format!(".{}.tmp", state.user));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &target)?;
        if let Ok(dir) = File::open(&self.progress_dir) {
            // not supported on every platform
            let _ = dir.sync_all();
        }
        Ok(())
    }

    fn record_delivery(&self, delivery_id: &str) -> Result<DeliveryStatus, StoreError> {
        check_delivery_id(delivery_id)?;
        let mut ledger = lock(&self.ledger);
        if ledger.ids.contains_key(delivery_id) {
            return Ok(DeliveryStatus::Duplicate);
        }
        let at = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
        ledger.file.write_all(format!("{delivery_id}\t{at}\n").as_bytes())?;
        ledger.file.sync_data()?;
        ledger.ids.insert(delivery_id.to_string(), at);
        Ok(DeliveryStatus::Fresh)
    }
}
