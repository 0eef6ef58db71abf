use std::collections::BTreeMap;
use std::future::Future;
use std::panic::AssertUnwindSafe;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Serialize;
use tokio::task::JoinHandle;

use crate::miner::Timestamp;

/// A unit of recurring work; returns the number of rows written.
pub type Job = Arc<dyn Fn() -> Result<usize, String> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct JobStatus {
    pub running: bool,
    pub runs_started: u64,
    /// Finished runs, successful or not.
    pub runs_completed: u64,
    pub runs_failed: u64,
    /// Ticks skipped because the previous run was still going.
    pub skipped: u64,
    pub last_run: Option<Timestamp>,
    pub last_status: Option<RunStatus>,
    pub last_rows: Option<usize>,
    /// Most recent failure; kept after later successful runs.
    pub last_error: Option<String>,
    pub last_error_at: Option<Timestamp>,
}

struct Entry {
    job: Job,
    status: JobStatus,
}

/// Runs named jobs on a fixed interval. A job whose previous run has not
/// finished is skipped for that tick. Failures and panics are recorded and
/// never stop the loop.
#[derive(Clone, Default)]
pub struct Scheduler {
    jobs: Arc<Mutex<BTreeMap<String, Entry>>>,
}

impl Scheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_job(&self, name: &str, job: Job) {
        self.jobs.lock().expect("scheduler lock").insert(
            name.to_string(),
            Entry {
                job,
                status: JobStatus::default(),
            },
        );
    }

    pub fn job_names(&self) -> Vec<String> {
        self.jobs.lock().expect("scheduler lock").keys().cloned().collect()
    }

    pub fn status(&self) -> BTreeMap<String, JobStatus> {
        self.jobs
            .lock()
            .expect("scheduler lock")
            .iter()
            .map(|(k, e)| (k.clone(), e.status.clone()))
            .collect()
    }

    /// Start job `name` unless it is already running, in which case the skip
    /// counter goes up and `Some(None)` is returned. `None` for an unknown job.
    /// Must be called inside a Tokio runtime.
    pub fn trigger(&self, name: &str) -> Option<Option<JoinHandle<Result<usize, String>>>> {
        let job = {
            let mut jobs = self.jobs.lock().expect("scheduler lock");
            let entry = jobs.get_mut(name)?;
            if entry.status.running {
                entry.status.skipped += 1;
                tracing::warn!(job = name, "previous run still in progress; skipping");
                return Some(None);
            }
            entry.status.running = true;
            entry.status.runs_started += 1;
            entry.status.last_run = Some(Timestamp::now());
            Arc::clone(&entry.job)
        };
        let jobs = Arc::clone(&self.jobs);
        let name = name.to_string();
        Some(Some(tokio::task::spawn_blocking(move || {
            let result = std::panic::catch_unwind(AssertUnwindSafe(|| job()))
                .unwrap_or_else(|_| Err("job panicked".to_string()));
            let mut jobs = jobs.lock().expect("scheduler lock");
            if let Some(entry) = jobs.get_mut(&name) {
                let s = &mut entry.status;
                s.running = false;
                s.runs_completed += 1;
                match &result {
                    Ok(rows) => {
                        s.last_status = Some(RunStatus::Ok);
                        s.last_rows = Some(*rows);
                    }
                    Err(e) => {
                        tracing::error!(job = %name, error = %e, "scheduled run failed");
                        s.runs_failed += 1;
                        s.last_status = Some(RunStatus::Error);
                        s.last_error = Some(e.clone());
                        s.last_error_at = Some(Timestamp::now());
                    }
                }
            }
            result
        })))
    }

    /// Trigger every job once; returns handles of the runs actually started.
    pub fn tick(&self) -> Vec<JoinHandle<Result<usize, String>>> {
        self.job_names()
            .iter()
            .filter_map(|n| self.trigger(n).flatten())
            .collect()
    }

    /// Tick every `interval`, starting immediately, until `shutdown` resolves
    /// or `max_ticks` ticks have fired; then wait for runs still in flight.
    pub async fn run<F>(&self, interval: Duration, max_ticks: Option<u64>, shutdown: F)
    where
        F: Future<Output = ()>,
    {
        let mut timer = tokio::time::interval(interval);
        timer.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        let mut in_flight = Vec::new();
        let mut ticks = 0u64;
        tokio::pin!(shutdown);
        loop {
            if max_ticks.is_some_and(|m| ticks >= m) {
                break;
            }
            tokio::select! {
                _ = &mut shutdown => break,
                _ = timer.tick() => {
                    ticks += 1;
                    in_flight.retain(|h: &JoinHandle<_>| !h.is_finished());
                    in_flight.extend(self.tick());
                }
            }
        }
        for h in in_flight {
            let _ = h.await;
        }
    }
}
