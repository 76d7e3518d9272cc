use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crate::engine::Scenario;
use crate::error::{Error, Result};
use crate::store::{DirStore, ResultStore};

use super::master::{master_run, MasterOptions, MasterReport};
use super::message::RunMode;
use super::transport::{channel_links, Delayed};
use super::worker::{worker_run, WorkerOptions, WorkerReport};

/// A single-process run over the channel transport.
#[derive(Debug, Clone)]
pub struct LocalOptions {
    pub workers: usize,
    pub mode: RunMode,
    /// Artificial service time per incorporated result (MW only).
    pub master_delay: Duration,
    /// Fixed latency added to every message.
    pub link_delay: Duration,
    /// Uniform random latency added on top of `link_delay`.
    pub link_jitter: Duration,
    pub persist_latency: Duration,
    pub seed: u64,
    /// Store run directory for MWD. A temporary directory is used if unset.
    pub store_dir: Option<PathBuf>,
}

impl LocalOptions {
    pub fn new(workers: usize, mode: RunMode) -> Self {
        Self {
            workers,
            mode,
            master_delay: Duration::ZERO,
            link_delay: Duration::ZERO,
            link_jitter: Duration::ZERO,
            persist_latency: Duration::ZERO,
            seed: 0,
            store_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalRun {
    pub master: MasterReport,
    pub workers: Vec<WorkerReport>,
}

pub fn run_local(scenario: &Scenario, opts: &LocalOptions) -> Result<LocalRun> {
    if opts.workers == 0 {
        return Err(Error::Config("at least one worker is required".into()));
    }
    let mut _scratch = None;
    let store: Option<Arc<dyn ResultStore>> = match opts.mode {
        RunMode::Mw => None,
        RunMode::Mwd => {
            let dir = match &opts.store_dir {
                Some(d) => d.clone(),
                None => {
                    let t = tempfile::tempdir()?;
                    let p = t.path().to_path_buf();
                    _scratch = Some(t);
                    p
                }
            };
            Some(Arc::new(DirStore::open(dir)?))
        }
    };

    let (hub, ends) = channel_links(opts.workers);
    let handles: Vec<_> = ends
        .into_iter()
        .enumerate()
        .map(|(i, end)| {
            let wopts = WorkerOptions {
                worker_id: i as u32,
                expect_mode: Some(opts.mode),
                store: store.clone(),
                persist_latency: opts.persist_latency,
            };
            let mut link = Delayed::new(
                end,
                opts.link_delay,
                opts.link_jitter,
                opts.seed.wrapping_add(1 + i as u64),
            );
            thread::Builder::new()
                .name(format!("worker-{i}"))
                .spawn(move || worker_run(&mut link, &wopts))
                .map_err(Error::Io)
        })
        .collect::<Result<_>>()?;

    let mut link = Delayed::new(hub, opts.link_delay, opts.link_jitter, opts.seed);
    let mopts = MasterOptions {
        mode: opts.mode,
        result_delay: opts.master_delay,
        store,
    };
    let master = master_run(scenario, &mut link, &mopts);
    drop(link);

    let mut workers = Vec::with_capacity(handles.len());
    let mut worker_error = None;
    for h in handles {
        match h.join() {
            Ok(Ok(r)) => workers.push(r),
            Ok(Err(e)) => {
                worker_error.get_or_insert(e);
            }
            Err(_) => {
                worker_error.get_or_insert(Error::Protocol("worker thread panicked".into()));
            }
        }
    }
    let master = match (master, worker_error) {
        (Ok(m), None) => m,
        (Err(e @ Error::Config(_)), _) => return Err(e),
        (_, Some(e)) => return Err(e),
        (Err(e), None) => return Err(e),
    };
    Ok(LocalRun { master, workers })
}
