use std::collections::HashMap;
use std::sync::mpsc::{self, SyncSender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::antenna::AntennaDiagram;
use crate::engine::predict_on_subgrids;
use crate::error::{Error, Result};
use crate::propagation::PathLossField;
use crate::store::ResultStore;
use crate::terrain::GridHeader;

use super::message::{Message, RunMode};
use super::transport::WorkerLink;

#[derive(Clone)]
pub struct WorkerOptions {
    pub worker_id: u32,
    /// If set, the run mode announced by the master must match.
    pub expect_mode: Option<RunMode>,
    /// Required in MWD mode.
    pub store: Option<Arc<dyn ResultStore>>,
    /// Artificial latency added to every table write.
    pub persist_latency: Duration,
}

impl WorkerOptions {
    pub fn new(worker_id: u32) -> Self {
        Self {
            worker_id,
            expect_mode: None,
            store: None,
            persist_latency: Duration::ZERO,
        }
    }
}

/// Per-assignment timestamps, relative to worker start.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentTiming {
    pub tx_id: String,
    pub compute_start: Duration,
    pub compute_end: Duration,
    pub persist_start: Option<Duration>,
    pub persist_end: Option<Duration>,
}

#[derive(Debug, Clone)]
pub struct WorkerReport {
    pub worker_id: u32,
    pub mode: RunMode,
    pub timings: Vec<AssignmentTiming>,
    pub wall: Duration,
}

struct PersistJob {
    tx_id: String,
    field: PathLossField,
}

type PersistLog = Vec<(String, Duration, Duration)>;

struct Persister {
    handoff: Option<SyncSender<PersistJob>>,
    handle: Option<JoinHandle<Result<PersistLog>>>,
}

impl Persister {
    fn spawn(
        store: Arc<dyn ResultStore>,
        extent: GridHeader,
        latency: Duration,
        epoch: Instant,
    ) -> Self {
        let (tx, rx) = mpsc::sync_channel::<PersistJob>(0);
        let handle = thread::spawn(move || {
            let mut log = Vec::new();
            for job in rx {
                let start = epoch.elapsed();
                if !latency.is_zero() {
                    thread::sleep(latency);
                }
                store.put_table(&job.tx_id, &job.field, &extent)?;
                log.push((job.tx_id, start, epoch.elapsed()));
            }
            Ok(log)
        });
        Self {
            handoff: Some(tx),
            handle: Some(handle),
        }
    }

    /// Blocks until the previous persist has finished.
    fn submit(&mut self, job: PersistJob) -> Result<()> {
        let sender = self.handoff.as_ref().expect("persister open");
        if sender.send(job).is_ok() {
            return Ok(());
        }
        self.handoff = None;
        Err(self.drain().err().unwrap_or_else(|| {
            Error::Store("persistence task exited unexpectedly".into())
        }))
    }

    fn drain(&mut self) -> Result<PersistLog> {
        self.handoff = None;
        let Some(handle) = self.handle.take() else {
            return Ok(Vec::new());
        };
        handle
            .join()
            .map_err(|_| Error::Store("persistence task panicked".into()))?
    }
}

fn protocol(expected: &str, got: &Message) -> Error {
    Error::Protocol(format!("expected {expected}, got {:?}", got.kind()))
}

/// Serves one master until Stop. In MWD mode each result is handed to a
/// background persistence task while the next assignment is requested.
pub fn worker_run<L: WorkerLink + ?Sized>(link: &mut L, opts: &WorkerOptions) -> Result<WorkerReport> {
    let epoch = Instant::now();
    let meta = match link.recv()? {
        Message::Metadata(m) => m,
        other => return Err(protocol("Metadata", &other)),
    };
    if let Some(mode) = opts.expect_mode {
        if mode != meta.mode {
            return Err(Error::Config(format!(
                "worker started in {mode} mode but master runs {}",
                meta.mode
            )));
        }
    }
    let diagrams: HashMap<&str, &AntennaDiagram> =
        meta.diagrams.iter().map(|d| (d.name.as_str(), d)).collect();
    let mut persister = match meta.mode {
        RunMode::Mw => None,
        RunMode::Mwd => {
            let store = opts.store.clone().ok_or_else(|| {
                Error::Config("MWD mode requires a result store on the worker".into())
            })?;
            Some(Persister::spawn(store, meta.extent, opts.persist_latency, epoch))
        }
    };

    let mut timings = Vec::new();
    loop {
        link.send(Message::Idle {
            worker_id: opts.worker_id,
        })?;
        match link.recv()? {
            Message::Stop => break,
            Message::KeepAlive => {}
            other => return Err(protocol("KeepAlive or Stop", &other)),
        }
        let a = match link.recv()? {
            Message::Assignment(a) => a,
            other => return Err(protocol("Assignment", &other)),
        };
        if a.dem.offset != a.clutter.offset
            || !a.dem.grid.header().same_extent(a.clutter.grid.header())
        {
            return Err(Error::Protocol(format!(
                "assignment `{}` has mismatched sub-grids",
                a.tx.id
            )));
        }
        let diagram = diagrams.get(a.tx.diagram_id.as_str()).ok_or_else(|| {
            Error::Protocol(format!("unknown antenna diagram `{}`", a.tx.diagram_id))
        })?;
        let compute_start = epoch.elapsed();
        let field = predict_on_subgrids(
            &a.dem,
            &a.clutter,
            &a.tx,
            diagram,
            &meta.params,
            &meta.clutter_losses,
        )?;
        timings.push(AssignmentTiming {
            tx_id: a.tx.id.clone(),
            compute_start,
            compute_end: epoch.elapsed(),
            persist_start: None,
            persist_end: None,
        });
        let tx_id = a.tx.id;
        match persister.as_mut() {
            None => link.send(Message::Result { tx_id, field })?,
            Some(p) => p.submit(PersistJob { tx_id, field })?,
        }
    }

    if let Some(mut p) = persister {
        let log = p.drain()?;
        for (tx_id, start, end) in log {
            if let Some(t) = timings.iter_mut().find(|t| t.tx_id == tx_id) {
                t.persist_start = Some(start);
                t.persist_end = Some(end);
            }
        }
    }
    Ok(WorkerReport {
        worker_id: opts.worker_id,
        mode: meta.mode,
        timings,
        wall: epoch.elapsed(),
    })
}
