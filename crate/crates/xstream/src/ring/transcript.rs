//! Ordered record of what entered and left the ring.

use std::fmt;

use crate::model::{BlockId, EdgeKey, QueryId, RejectReason, Timestamp, VertexId};

/// Payload of one output line.
#[derive(Clone, Debug, PartialEq)]
pub enum OutputResult {
    Bool(bool),
    /// Constant query that arrived during aging.
    Busy,
    Rejected(RejectReason),
    Count(u64),
    Pair(BlockId, BlockId),
    Tree(EdgeKey),
    Size(BlockId, u64),
    Vertex(BlockId, VertexId),
    /// End of a non-constant query.
    Done,
    /// Aging finished; queries are enabled again.
    Aged,
    /// Threshold chosen by a search; `None` when nothing was stored.
    AutoAge(Option<Timestamp>),
}

impl fmt::Display for OutputResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputResult::Bool(b) => write!(f, "{b}"),
            OutputResult::Busy => f.write_str("BUSY"),
            OutputResult::Rejected(r) => write!(f, "REJECTED {r}"),
            OutputResult::Count(n) => write!(f, "{n}"),
            OutputResult::Pair(b, l) => write!(f, "PAIR {b} {l}"),
            OutputResult::Tree(k) => write!(f, "TREE {k}"),
            OutputResult::Size(n, s) => write!(f, "SIZE {n} {s}"),
            OutputResult::Vertex(n, v) => write!(f, "VERTEX {n} {v}"),
            OutputResult::Done => f.write_str("DONE"),
            OutputResult::Aged => f.write_str("AGED"),
            OutputResult::AutoAge(Some(t)) => write!(f, "AUTOAGE {t}"),
            OutputResult::AutoAge(None) => f.write_str("AUTOAGE NONE"),
        }
    }
}

/// A result leaving the ring through the I/O processor.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputEvent {
    pub tick: u64,
    pub qid: QueryId,
    pub result: OutputResult,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TranscriptEvent {
    In { tick: u64, item: String },
    Out(OutputEvent),
}

impl fmt::Display for TranscriptEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranscriptEvent::In { tick, item } => write!(f, "{tick} IN {item}"),
            TranscriptEvent::Out(o) => write!(f, "{} OUT {} {}", o.tick, o.qid, o.result),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    pub events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn outputs(&self) -> impl Iterator<Item = &OutputEvent> {
        self.events.iter().filter_map(|e| match e {
            TranscriptEvent::Out(o) => Some(o),
            _ => None,
        })
    }

    /// Outputs belonging to one query or command.
    pub fn results_for(&self, qid: QueryId) -> Vec<&OutputEvent> {
        self.outputs().filter(|o| o.qid == qid).collect()
    }

    pub fn render(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }
}
