//! Shared vocabulary: identifiers, edges, slots, bundles and stream items.

use std::fmt;

use crate::aging::AgingPredicate;

/// Opaque vertex name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u64);

/// Building-block name: a primitive vertex or a local-component name.
///
/// Component names reuse member ids, so the two namespaces coincide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u64);

/// Tick at which an item entered the ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

/// Query tag; equal to the injection tick of the query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryId(pub u64);

impl From<VertexId> for BlockId {
    fn from(v: VertexId) -> Self {
        BlockId(v.0)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Order-independent identity of an undirected edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    lo: VertexId,
    hi: VertexId,
}

impl EdgeKey {
    pub fn new(a: VertexId, b: VertexId) -> Self {
        if a <= b {
            EdgeKey { lo: a, hi: b }
        } else {
            EdgeKey { lo: b, hi: a }
        }
    }

    pub fn lo(&self) -> VertexId {
        self.lo
    }

    pub fn hi(&self) -> VertexId {
        self.hi
    }

    pub fn is_loop(&self) -> bool {
        self.lo == self.hi
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.lo, self.hi)
    }
}

/// The five-field circulating edge record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LabeledEdge {
    pub u: VertexId,
    pub v: VertexId,
    pub lu: BlockId,
    pub lv: BlockId,
    pub t: Timestamp,
}

impl LabeledEdge {
    /// An edge as it leaves the I/O processor: labels equal endpoints.
    pub fn fresh(u: VertexId, v: VertexId, t: Timestamp) -> Self {
        LabeledEdge {
            u,
            v,
            lu: u.into(),
            lv: v.into(),
            t,
        }
    }

    pub fn key(&self) -> EdgeKey {
        canonical_key(self)
    }
}

/// Endpoint-set identity; labels and timestamp play no part.
pub fn canonical_key(e: &LabeledEdge) -> EdgeKey {
    EdgeKey::new(e.u, e.v)
}

/// How far an in-flight edge has been classified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    /// Unclassified, or a potential tree edge forwarded by a sealed processor.
    Fresh,
    /// Known to lie inside a component.
    NonTree,
    /// Survived an aging predicate and awaits recycling through the head.
    Unresolved,
}

/// Slot envelope around a [`LabeledEdge`].
///
/// `size_u` and `size_v` carry the vertex counts of the blocks named by
/// `lu` and `lv`, so consumers can keep exact component sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransitEdge {
    pub edge: LabeledEdge,
    pub class: EdgeClass,
    pub size_u: u64,
    pub size_v: u64,
}

impl TransitEdge {
    pub fn fresh(u: VertexId, v: VertexId, t: Timestamp) -> Self {
        TransitEdge {
            edge: LabeledEdge::fresh(u, v, t),
            class: EdgeClass::Fresh,
            size_u: 1,
            size_v: 1,
        }
    }

    /// Rebuild from a stored key with primitive labels.
    pub fn from_key(key: EdgeKey, t: Timestamp, class: EdgeClass) -> Self {
        TransitEdge {
            edge: LabeledEdge::fresh(key.lo(), key.hi(), t),
            class,
            size_u: 1,
            size_v: 1,
        }
    }
}

/// What a non-constant query emits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpKind {
    ComponentLabels,
    SpanningTree,
    SmallComponents(u64),
}

/// Control tokens. The builder token is a bundle flag instead.
#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Loader,
    Aging(AgingPredicate),
    QueryPhaseDone(QueryId),
    QueryDone(QueryId),
    DumpCommand(QueryId, DumpKind),
    Fail,
}

/// Why the I/O processor refused a query or command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    /// Aging, a threshold search or a non-constant query is in progress.
    Busy,
    /// Another non-constant query holds the ring.
    Concurrent,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Busy => f.write_str("BUSY"),
            RejectReason::Concurrent => f.write_str("CONCURRENT"),
        }
    }
}

/// One circuit of the threshold search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchProbe {
    pub qid: QueryId,
    /// 0 gathers totals; later phases evaluate `candidate`.
    pub phase: u32,
    pub candidate: Timestamp,
    pub estimate: f64,
    pub stored: u64,
    pub min_t: u64,
    pub max_t: u64,
}

impl SearchProbe {
    pub fn gather(qid: QueryId) -> Self {
        SearchProbe {
            qid,
            phase: 0,
            candidate: Timestamp(0),
            estimate: 0.0,
            stored: 0,
            min_t: u64::MAX,
            max_t: 0,
        }
    }
}

/// Query traffic riding in slots.
#[derive(Clone, Debug, PartialEq)]
pub enum QueryMessage {
    Conn {
        qid: QueryId,
        u: VertexId,
        v: VertexId,
        lu: BlockId,
        lv: BlockId,
        answer: bool,
        busy: bool,
    },
    EdgeCount {
        qid: QueryId,
        n: u64,
        busy: bool,
    },
    MaxComponent {
        qid: QueryId,
        best: u64,
        busy: bool,
    },
    Rejected {
        qid: QueryId,
        reason: RejectReason,
    },
    Size {
        qid: QueryId,
        name: BlockId,
        size: u64,
    },
    Vertex {
        qid: QueryId,
        name: BlockId,
        v: VertexId,
    },
    DumpPair {
        qid: QueryId,
        block: BlockId,
        label: BlockId,
    },
    TreeEdge {
        qid: QueryId,
        key: EdgeKey,
    },
    Search(SearchProbe),
}

/// Content of one bundle position.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum Slot {
    #[default]
    Empty,
    Edge(TransitEdge),
    Token(TokenKind),
    Query(QueryMessage),
}

impl Slot {
    pub fn is_empty(&self) -> bool {
        matches!(self, Slot::Empty)
    }
}

/// The unit handed between neighbours each tick.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    /// Position 0 is primary, the rest payload.
    pub slots: Vec<Slot>,
    /// Builder token, encoded as a flag.
    pub builder_token: bool,
    /// Running sum of free space reported by the processors passed.
    pub free_meter: u64,
}

impl Bundle {
    pub fn empty(k: usize) -> Self {
        Bundle {
            slots: vec![Slot::Empty; k],
            builder_token: false,
            free_meter: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.slots.len()
    }

    pub fn primary(&self) -> &Slot {
        &self.slots[0]
    }

    pub fn payload(&self) -> &[Slot] {
        &self.slots[1..]
    }

    /// In-flight edges, primary first.
    pub fn edges(&self) -> impl Iterator<Item = &TransitEdge> {
        self.slots.iter().filter_map(|s| match s {
            Slot::Edge(e) => Some(e),
            _ => None,
        })
    }
}

/// One input record of the stream.
#[derive(Clone, Debug, PartialEq)]
pub enum StreamItem {
    Empty,
    Edge(VertexId, VertexId),
    Conn(VertexId, VertexId),
    EdgeCount,
    SmallComponents(u64),
    SpanningTree,
    MaxComponent,
    Dump,
    Age(AgingPredicate),
    AutoAge(f64),
}

impl StreamItem {
    pub fn edge(u: u64, v: u64) -> Self {
        StreamItem::Edge(VertexId(u), VertexId(v))
    }

    pub fn conn(u: u64, v: u64) -> Self {
        StreamItem::Conn(VertexId(u), VertexId(v))
    }

    pub fn is_edge(&self) -> bool {
        matches!(self, StreamItem::Edge(..))
    }
}
