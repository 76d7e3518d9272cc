use std::collections::BTreeMap;
use std::fmt;

use super::message::MessageKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToWorker,
    FromWorker,
}

/// One message as seen by the master.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub worker: usize,
    pub direction: Direction,
    pub kind: MessageKind,
    pub tx_id: Option<String>,
}

impl TraceEvent {
    pub fn to_worker(worker: usize, kind: MessageKind) -> Self {
        Self {
            worker,
            direction: Direction::ToWorker,
            kind,
            tx_id: None,
        }
    }

    pub fn from_worker(worker: usize, kind: MessageKind) -> Self {
        Self {
            worker,
            direction: Direction::FromWorker,
            kind,
            tx_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub worker: usize,
    /// Trace index of the offending message, when one can be singled out.
    pub index: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "worker {} at message {i}: {}", self.worker, self.detail),
            None => write!(f, "worker {}: {}", self.worker, self.detail),
        }
    }
}

/// Checks request/reply pairing per worker: every Idle answered by exactly
/// one KeepAlive or Stop, exactly one Stop as the last message to the
/// worker, and each KeepAlive immediately followed by an Assignment.
pub fn pair_audit(trace: &[TraceEvent]) -> Vec<Violation> {
    let mut per_worker: BTreeMap<usize, Vec<(usize, &TraceEvent)>> = BTreeMap::new();
    for (i, ev) in trace.iter().enumerate() {
        per_worker.entry(ev.worker).or_default().push((i, ev));
    }
    let mut out = Vec::new();
    for (&worker, events) in &per_worker {
        let mut flag = |index: Option<usize>, detail: String| {
            out.push(Violation {
                worker,
                index,
                detail,
            })
        };
        let count = |kind| events.iter().filter(|(_, e)| e.kind == kind).count();
        let idles = count(MessageKind::Idle);
        let keepalives = count(MessageKind::KeepAlive);
        let stops = count(MessageKind::Stop);
        if idles != keepalives + stops {
            flag(
                None,
                format!("{idles} Idle vs {keepalives} KeepAlive + {stops} Stop"),
            );
        }
        let outgoing: Vec<_> = events
            .iter()
            .filter(|(_, e)| e.direction == Direction::ToWorker)
            .collect();
        match stops {
            0 => flag(None, "never stopped".into()),
            1 => {}
            n => flag(None, format!("stopped {n} times")),
        }
        if let Some((i, last)) = outgoing.last() {
            if stops > 0 && last.kind != MessageKind::Stop {
                flag(Some(*i), format!("{:?} sent after Stop", last.kind));
            }
        }
        for (k, (i, ev)) in outgoing.iter().enumerate() {
            let next = outgoing.get(k + 1).map(|(_, e)| e.kind);
            match ev.kind {
                MessageKind::KeepAlive if next != Some(MessageKind::Assignment) => {
                    flag(Some(*i), "KeepAlive not followed by an Assignment".into())
                }
                MessageKind::Assignment
                    if k == 0 || outgoing[k - 1].1.kind != MessageKind::KeepAlive =>
                {
                    flag(Some(*i), "Assignment without a preceding KeepAlive".into())
                }
                _ => {}
            }
        }
        for (i, ev) in events.iter() {
            let wrong_way = match ev.kind {
                MessageKind::KeepAlive | MessageKind::Stop | MessageKind::Assignment => {
                    ev.direction != Direction::ToWorker
                }
                MessageKind::Idle | MessageKind::Result => ev.direction != Direction::FromWorker,
                MessageKind::Metadata => false,
            };
            if wrong_way {
                flag(Some(*i), format!("{:?} flowing the wrong way", ev.kind));
            }
        }
    }
    out
}
