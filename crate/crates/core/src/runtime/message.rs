use std::fmt;

use crate::antenna::AntennaDiagram;
use crate::engine::TransmitterConfig;
use crate::propagation::{ClutterLossTable, PathLossField, PropagationParams};
use crate::terrain::{GridHeader, SubGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunMode {
    /// Workers return every result to the master, which aggregates as
    /// results arrive.
    Mw,
    /// Workers persist results to the store from a background task; the
    /// master aggregates by scanning the store at the end.
    Mwd,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Mw => "mw",
            RunMode::Mwd => "mwd",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mw" => Ok(RunMode::Mw),
            "mwd" => Ok(RunMode::Mwd),
            other => Err(format!("unknown run mode `{other}` (expected mw or mwd)")),
        }
    }
}

/// Data common to every transmitter, broadcast once per run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub mode: RunMode,
    pub params: PropagationParams,
    pub clutter_losses: ClutterLossTable,
    pub diagrams: Vec<AntennaDiagram>,
    pub extent: GridHeader,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub tx: TransmitterConfig,
    pub dem: SubGrid,
    pub clutter: SubGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Metadata(Box<Metadata>),
    Idle { worker_id: u32 },
    KeepAlive,
    Assignment(Box<Assignment>),
    Result { tx_id: String, field: PathLossField },
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Metadata,
    Idle,
    KeepAlive,
    Assignment,
    Result,
    Stop,
}

impl MessageKind {
    pub fn tag(self) -> u8 {
        match self {
            MessageKind::Metadata => 1,
            MessageKind::Idle => 2,
            MessageKind::KeepAlive => 3,
            MessageKind::Assignment => 4,
            MessageKind::Result => 5,
            MessageKind::Stop => 6,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            1 => MessageKind::Metadata,
            2 => MessageKind::Idle,
            3 => MessageKind::KeepAlive,
            4 => MessageKind::Assignment,
            5 => MessageKind::Result,
            6 => MessageKind::Stop,
            _ => return None,
        })
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Metadata(_) => MessageKind::Metadata,
            Message::Idle { .. } => MessageKind::Idle,
            Message::KeepAlive => MessageKind::KeepAlive,
            Message::Assignment(_) => MessageKind::Assignment,
            Message::Result { .. } => MessageKind::Result,
            Message::Stop => MessageKind::Stop,
        }
    }

    /// Transmitter the message concerns, if any.
    pub fn tx_id(&self) -> Option<&str> {
        match self {
            Message::Assignment(a) => Some(&a.tx.id),
            Message::Result { tx_id, .. } => Some(tx_id),
            _ => None,
        }
    }
}
