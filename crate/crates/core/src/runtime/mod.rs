//! Master/worker execution of the prediction pipeline.
//!
//! The master hands out one transmitter at a time to whichever worker
//! reports idle. In [`RunMode::Mw`] results travel back to the master; in
//! [`RunMode::Mwd`] workers write them to a [`ResultStore`](crate::store::ResultStore)
//! from a background task and the master scans the store at the end.

mod audit;
mod codec;
mod local;
mod master;
mod message;
mod transport;
mod worker;

pub use audit::{pair_audit, Direction, TraceEvent, Violation};
pub use codec::{decode_body, encode_body, encode_frame, read_message, write_message, MAX_FRAME_BYTES};
pub use local::{run_local, LocalOptions, LocalRun};
pub use master::{master_run, MasterOptions, MasterReport};
pub use message::{Assignment, Message, MessageKind, Metadata, RunMode};
pub use transport::{
    channel_links, connect_workers, ChannelWorker, Delayed, Inbound, MasterHub, MasterLink,
    TcpWorkerLink, WorkerLink,
};
pub use worker::{worker_run, AssignmentTiming, WorkerOptions, WorkerReport};
