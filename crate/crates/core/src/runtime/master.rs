use std::collections::{HashMap, VecDeque};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::engine::{Aggregator, CoverageRaster, Scenario};
use crate::error::{Error, Result};
use crate::propagation::PathLossField;
use crate::store::{scan_max, ResultStore};

use super::audit::TraceEvent;
use super::message::{Assignment, Message, Metadata, RunMode};
use super::transport::{Inbound, MasterLink};

#[derive(Clone)]
pub struct MasterOptions {
    pub mode: RunMode,
    /// Artificial service time per incorporated result (MW only).
    pub result_delay: Duration,
    /// Required in MWD mode; must hold no tables when the run starts.
    pub store: Option<Arc<dyn ResultStore>>,
}

impl MasterOptions {
    pub fn new(mode: RunMode) -> Self {
        Self {
            mode,
            result_delay: Duration::ZERO,
            store: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MasterReport {
    pub raster: CoverageRaster,
    pub trace: Vec<TraceEvent>,
    /// Assignments handed to each worker.
    pub assignments: Vec<usize>,
    pub wall: Duration,
}

struct Session<'a, L: ?Sized> {
    link: &'a mut L,
    trace: Vec<TraceEvent>,
}

impl<L: MasterLink + ?Sized> Session<'_, L> {
    fn send(&mut self, worker: usize, msg: Message) -> Result<()> {
        let mut ev = TraceEvent::to_worker(worker, msg.kind());
        ev.tx_id = msg.tx_id().map(str::to_owned);
        self.trace.push(ev);
        self.link.send(worker, msg)
    }

    fn note(&mut self, ev: &Inbound) {
        if let Inbound::Message(w, msg) = ev {
            let mut t = TraceEvent::from_worker(*w, msg.kind());
            t.tx_id = msg.tx_id().map(str::to_owned);
            self.trace.push(t);
        }
    }
}

/// Drives a run: broadcasts metadata, answers every Idle with either a
/// KeepAlive and the next transmitter or a Stop, and aggregates results.
/// Returns once every worker has been stopped and has disconnected.
pub fn master_run<L: MasterLink + ?Sized>(
    scenario: &Scenario,
    link: &mut L,
    opts: &MasterOptions,
) -> Result<MasterReport> {
    let started = Instant::now();
    scenario.validate()?;
    let workers = link.workers();
    if workers == 0 {
        return Err(Error::Config("at least one worker is required".into()));
    }
    let store = match (opts.mode, &opts.store) {
        (RunMode::Mwd, None) => {
            return Err(Error::Config("MWD mode requires a result store".into()))
        }
        (RunMode::Mwd, Some(s)) => {
            let existing = s.table_ids()?.len();
            if existing > 0 {
                return Err(Error::Config(format!(
                    "result store already holds {existing} tables"
                )));
            }
            Some(Arc::clone(s))
        }
        (RunMode::Mw, _) => None,
    };

    let mut session = Session {
        link,
        trace: Vec::new(),
    };
    let metadata = Metadata {
        mode: opts.mode,
        params: scenario.params,
        clutter_losses: scenario.clutter_losses.clone(),
        diagrams: scenario.diagrams.values().cloned().collect(),
        extent: *scenario.extent(),
    };
    for w in 0..workers {
        session.send(w, Message::Metadata(Box::new(metadata.clone())))?;
    }

    let power: HashMap<&str, f64> = scenario
        .transmitters
        .iter()
        .map(|t| (t.id.as_str(), t.power_dbm))
        .collect();
    let mut outstanding: HashMap<String, usize> = HashMap::new();
    let mut agg = Aggregator::new(*scenario.extent());
    let mut pending: VecDeque<(String, PathLossField)> = VecDeque::new();
    let mut next = 0;
    let mut stopped = vec![false; workers];
    let mut closed = vec![false; workers];
    let mut assignments = vec![0; workers];
    let mut results = 0;
    // Workers that returned a result and whose follow-up Idle is due.
    let mut idle_due = vec![false; workers];

    while !(closed.iter().all(|c| *c) && pending.is_empty()) {
        let event = if closed.iter().all(|c| *c) {
            None
        } else if pending.is_empty() || idle_due.iter().any(|d| *d) {
            Some(session.link.recv()?)
        } else {
            session.link.try_recv()?
        };
        let Some(event) = event else {
            let (tx_id, field) = pending.pop_front().expect("pending result");
            if !opts.result_delay.is_zero() {
                thread::sleep(opts.result_delay);
            }
            agg.add_field(power[tx_id.as_str()], &field)?;
            continue;
        };
        session.note(&event);
        match event {
            Inbound::Closed(w) => {
                if !stopped[w] {
                    return Err(Error::Protocol(format!(
                        "worker {w} disconnected before being stopped"
                    )));
                }
                closed[w] = true;
                idle_due[w] = false;
            }
            Inbound::Message(w, Message::Idle { .. }) => {
                if stopped[w] {
                    return Err(Error::Protocol(format!("worker {w} sent Idle after Stop")));
                }
                idle_due[w] = false;
                if let Some(tx) = scenario.transmitters.get(next) {
                    next += 1;
                    let (dem, clutter) = scenario.cut(tx)?;
                    session.send(w, Message::KeepAlive)?;
                    session.send(
                        w,
                        Message::Assignment(Box::new(Assignment {
                            tx: tx.clone(),
                            dem,
                            clutter,
                        })),
                    )?;
                    outstanding.insert(tx.id.clone(), w);
                    assignments[w] += 1;
                } else {
                    session.send(w, Message::Stop)?;
                    stopped[w] = true;
                }
            }
            Inbound::Message(w, Message::Result { tx_id, field }) => {
                if opts.mode != RunMode::Mw {
                    return Err(Error::Protocol(format!(
                        "worker {w} returned a result in {} mode",
                        opts.mode
                    )));
                }
                if outstanding.remove(&tx_id) != Some(w) {
                    return Err(Error::Protocol(format!(
                        "worker {w} returned unexpected result `{tx_id}`"
                    )));
                }
                results += 1;
                idle_due[w] = true;
                pending.push_back((tx_id, field));
            }
            Inbound::Message(w, other) => {
                return Err(Error::Protocol(format!(
                    "unexpected {:?} from worker {w}",
                    other.kind()
                )))
            }
        }
    }

    let n = scenario.transmitters.len();
    let raster = match store {
        None => {
            if results != n {
                return Err(Error::Protocol(format!("received {results} of {n} results")));
            }
            agg.finish()
        }
        Some(store) => {
            let tables = store.table_ids()?.len();
            if tables != n {
                return Err(Error::Store(format!("store holds {tables} of {n} tables")));
            }
            scan_max(store.as_ref(), &scenario.transmitters, scenario.extent())?
        }
    };
    Ok(MasterReport {
        raster,
        trace: session.trace,
        assignments,
        wall: started.elapsed(),
    })
}
