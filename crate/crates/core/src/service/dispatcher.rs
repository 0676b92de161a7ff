use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::mpsc::{self, Sender, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use thiserror::Error;

use super::engine::{Engine, ProcessingSummary};
use crate::verification::ActivityEvent;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DispatchError {
    #[error("event queue is full")]
    Full,
    #[error("dispatcher is shut down")]
    Closed,
}

pub type SummarySink = Sender<Result<ProcessingSummary, String>>;

/// Bounded queues in front of a worker pool, partitioned by learner.
///
/// Every event for a learner lands on the same worker, so one learner's
/// events are processed in submission order while different learners run
/// in parallel. [`Dispatcher::shutdown`] stops intake and returns once every
/// queued event has been processed.
pub struct Dispatcher {
    senders: Mutex<Option<Vec<SyncSender<ActivityEvent>>>>,
    workers: Mutex<Vec<JoinHandle<()>>>,
    partitions: usize,
}

/// Stable worker index for a learner.
pub fn partition_for(user: &str, partitions: usize) -> usize {
    let mut h = DefaultHasher::new();
    user.to_ascii_lowercase().hash(&mut h);
    (h.finish() % partitions as u64) as usize
}

impl Dispatcher {
    /// Starts `workers` threads, each behind a queue of `capacity` events.
    /// Results are forwarded to `sink` when one is given, and logged.
    pub fn start(engine: Arc<Engine>, workers: usize, capacity: usize, sink: Option<SummarySink>) -> Self {
        let workers = workers.max(1);
        let mut senders = Vec::with_capacity(workers);
        let mut handles = Vec::with_capacity(workers);
        for i in 0..workers {
            let (tx, rx) = mpsc::sync_channel::<ActivityEvent>(capacity.max(1));
            let engine = engine.clone();
            let sink = sink.clone();
            let handle = thread::Builder::new()
                .name(format!("ossdoorway-worker-{i}"))
                .spawn(move || {
                    for event in rx {
                        let result = engine.handle_event(&event).map_err(|e| e.to_string());
                        match &result {
                            Ok(s) => log::info!("{} {} -> {}", s.delivery_id, s.user, s.disposition.label()),
                            Err(e) => log::error!("{} failed: {e}", event.delivery_id),
                        }
                        if let Some(sink) = &sink {
                            let _ = sink.send(result);
                        }
                    }
                })
                .expect("spawn worker thread");
            senders.push(tx);
            handles.push(handle);
        }
        Dispatcher {
            senders: Mutex::new(Some(senders)),
            workers: Mutex::new(handles),
            partitions: workers,
        }
    }

    fn sender(&self, user: &str) -> Result<SyncSender<ActivityEvent>, DispatchError> {
        let guard = self.senders.lock().unwrap_or_else(|e| e.into_inner());
        let senders = guard.as_ref().ok_or(DispatchError::Closed)?;
        Ok(senders[partition_for(user, self.partitions)].clone())
    }

    /// Enqueues, waiting for room if the learner's queue is full.
    pub fn submit(&self, event: ActivityEvent) -> Result<(), DispatchError> {
        self.sender(&event.actor)?
            .send(event)
            .map_err(|_| DispatchError::Closed)
    }

    /// Enqueues without waiting.
    pub fn try_submit(&self, event: ActivityEvent) -> Result<(), DispatchError> {
        self.sender(&event.actor)?.try_send(event).map_err(|e| match e {
            TrySendError::Full(_) => DispatchError::Full,
            TrySendError::Disconnected(_) => DispatchError::Closed,
        })
    }

    /// Closes intake and blocks until every queued event is processed.
    pub fn shutdown(&self) {
        drop(self.senders.lock().unwrap_or_else(|e| e.into_inner()).take());
        let handles = std::mem::take(&mut *self.workers.lock().unwrap_or_else(|e| e.into_inner()));
        for h in handles {
            let _ = h.join();
        }
    }
}

impl Drop for Dispatcher {
    fn drop(&mut self) {
        self.shutdown();
    }
}
