//! The I/O processor: turns stream items into head input, collects what
//! exits the tail, gates queries around aging and drives auto-aging.

use std::collections::VecDeque;

use crate::aging::{AgingPredicate, AutoAgePolicy, SearchStep, ThresholdSearch};
use crate::model::{
    Bundle, DumpKind, QueryId, QueryMessage, RejectReason, Slot, StreamItem, Timestamp,
    TokenKind, TransitEdge,
};
use crate::ring::transcript::{OutputEvent, OutputResult};

/// What the I/O processor handed the head and collected from the tail.
#[derive(Debug, Default)]
pub struct IoTick {
    pub outputs: Vec<OutputEvent>,
    /// Item actually injected this tick.
    pub injected: Option<StreamItem>,
    /// A returned primary edge pushed the new item back one tick.
    pub deferred: bool,
    pub failed: bool,
    /// Aging finished this tick.
    pub aged: bool,
}

#[derive(Debug)]
struct Search {
    qid: QueryId,
    search: ThresholdSearch,
}

/// Ring-side state of the I/O processor.
#[derive(Debug)]
pub struct IoProcessor {
    k: usize,
    p: usize,
    s_total: u64,
    pending: VecDeque<StreamItem>,
    aging: Option<QueryId>,
    query: Option<QueryId>,
    search: Option<Search>,
    auto: Option<AutoAgePolicy>,
    last_free: Option<u64>,
    /// Single-slot messages injected but not yet returned.
    outstanding: u64,
}

impl IoProcessor {
    pub fn new(k: usize, p: usize, s_total: u64, auto: Option<AutoAgePolicy>) -> Self {
        IoProcessor {
            k,
            p,
            s_total,
            pending: VecDeque::new(),
            aging: None,
            query: None,
            search: None,
            auto,
            last_free: None,
            outstanding: 0,
        }
    }

    pub fn aging_active(&self) -> bool {
        self.aging.is_some()
    }

    pub fn search_active(&self) -> bool {
        self.search.is_some()
    }

    pub fn query_active(&self) -> bool {
        self.query.is_some()
    }

    /// A command, query or queued item is still in progress.
    pub fn is_busy(&self) -> bool {
        self.aging.is_some() || self.query.is_some() || self.search.is_some() || !self.pending.is_empty()
    }

    /// Nothing in progress and every injected query has come back.
    pub fn is_quiescent(&self) -> bool {
        !self.is_busy() && self.outstanding == 0
    }

    /// Free space reported by the last bundle to complete a circuit.
    pub fn last_free(&self) -> Option<u64> {
        self.last_free
    }

    fn out(tick: u64, qid: QueryId, result: OutputResult, log: &mut IoTick) {
        log.outputs.push(OutputEvent { tick, qid, result });
    }

    /// Collect the returning bundle, inject the next item and build the head's input.
    pub fn begin_tick(&mut self, tick: u64, returning: Option<Bundle>, item: Option<StreamItem>) -> (Bundle, IoTick) {
        let mut log = IoTick::default();
        let mut head = Bundle::empty(self.k);
        if let Some(ret) = returning {
            self.last_free = Some(ret.free_meter);
            for (j, slot) in ret.slots.into_iter().enumerate() {
                if let Some(kept) = self.extract(tick, slot, &mut log) {
                    head.slots[j] = kept;
                }
            }
        }
        if let Some(item) = item {
            self.pending.push_back(item);
        }
        if head.slots[0].is_empty() {
            if let Some(item) = self.pending.pop_front() {
                head.slots[0] = self.inject(tick, &item);
                if let Slot::Query(m) = &head.slots[0] {
                    if !matches!(m, QueryMessage::Search(_)) {
                        self.outstanding += 1;
                    }
                }
                log.injected = Some(item);
            }
        } else if !self.pending.is_empty() {
            log.deferred = true;
        }
        if log.aged {
            self.aging = None;
        }
        self.maybe_auto_age(tick, &mut head);
        (head, log)
    }

    /// Handle one slot leaving the tail; returns what stays in the head's input.
    fn extract(&mut self, tick: u64, slot: Slot, log: &mut IoTick) -> Option<Slot> {
        match slot {
            Slot::Empty => None,
            Slot::Edge(e) => Some(Slot::Edge(e)),
            Slot::Token(tok) => match tok {
                TokenKind::Fail => {
                    log.failed = true;
                    None
                }
                TokenKind::Loader => {
                    if let Some(qid) = self.aging {
                        Self::out(tick, qid, OutputResult::Aged, log);
                    }
                    log.aged = true;
                    None
                }
                TokenKind::QueryDone(qid) => {
                    Self::out(tick, qid, OutputResult::Done, log);
                    self.query = None;
                    None
                }
                TokenKind::QueryPhaseDone(qid) => Some(Slot::Token(TokenKind::QueryPhaseDone(qid))),
                TokenKind::Aging(_) | TokenKind::DumpCommand(..) => None,
            },
            Slot::Query(QueryMessage::Search(probe)) => {
                let s = self.search.as_mut()?;
                match s.search.on_return(&probe) {
                    SearchStep::Probe(next) => Some(Slot::Query(QueryMessage::Search(next))),
                    SearchStep::Done(t) => {
                        let qid = s.qid;
                        self.search = None;
                        Self::out(tick, qid, OutputResult::AutoAge(Some(t)), log);
                        self.pending.push_front(StreamItem::Age(AgingPredicate::Threshold(t)));
                        None
                    }
                    SearchStep::Failed(_) => {
                        let qid = s.qid;
                        self.search = None;
                        Self::out(tick, qid, OutputResult::AutoAge(None), log);
                        None
                    }
                }
            }
            Slot::Query(m) => {
                if matches!(
                    m,
                    QueryMessage::Conn { .. }
                        | QueryMessage::EdgeCount { .. }
                        | QueryMessage::MaxComponent { .. }
                        | QueryMessage::Rejected { .. }
                ) {
                    self.outstanding = self.outstanding.saturating_sub(1);
                }
                let (qid, result) = match m {
                    QueryMessage::Conn { qid, answer, busy, .. } => {
                        (qid, if busy { OutputResult::Busy } else { OutputResult::Bool(answer) })
                    }
                    QueryMessage::EdgeCount { qid, n, busy } => {
                        (qid, if busy { OutputResult::Busy } else { OutputResult::Count(n) })
                    }
                    QueryMessage::MaxComponent { qid, best, busy } => {
                        (qid, if busy { OutputResult::Busy } else { OutputResult::Count(best) })
                    }
                    QueryMessage::Rejected { qid, reason } => (qid, OutputResult::Rejected(reason)),
                    QueryMessage::Size { qid, name, size } => (qid, OutputResult::Size(name, size)),
                    QueryMessage::Vertex { qid, name, v } => (qid, OutputResult::Vertex(name, v)),
                    QueryMessage::DumpPair { qid, block, label } => (qid, OutputResult::Pair(block, label)),
                    QueryMessage::TreeEdge { qid, key } => (qid, OutputResult::Tree(key)),
                    QueryMessage::Search(_) => unreachable!("handled above"),
                };
                Self::out(tick, qid, result, log);
                None
            }
        }
    }

    fn reject(qid: QueryId, reason: RejectReason) -> Slot {
        Slot::Query(QueryMessage::Rejected { qid, reason })
    }

    fn inject(&mut self, tick: u64, item: &StreamItem) -> Slot {
        let qid = QueryId(tick);
        let busy = self.aging.is_some();
        let exclusive = self.aging.is_some() || self.search.is_some() || self.query.is_some();
        match item {
            StreamItem::Empty => Slot::Empty,
            StreamItem::Edge(u, v) => Slot::Edge(TransitEdge::fresh(*u, *v, Timestamp(tick))),
            StreamItem::Conn(u, v) => Slot::Query(QueryMessage::Conn {
                qid,
                u: *u,
                v: *v,
                lu: (*u).into(),
                lv: (*v).into(),
                answer: u == v,
                busy,
            }),
            StreamItem::EdgeCount => Slot::Query(QueryMessage::EdgeCount { qid, n: 0, busy }),
            StreamItem::MaxComponent => Slot::Query(QueryMessage::MaxComponent { qid, best: 0, busy }),
            StreamItem::SmallComponents(_) | StreamItem::SpanningTree | StreamItem::Dump => {
                if self.aging.is_some() || self.search.is_some() {
                    return Self::reject(qid, RejectReason::Busy);
                }
                if self.query.is_some() {
                    return Self::reject(qid, RejectReason::Concurrent);
                }
                let kind = match item {
                    StreamItem::SmallComponents(l) => DumpKind::SmallComponents(*l),
                    StreamItem::SpanningTree => DumpKind::SpanningTree,
                    _ => DumpKind::ComponentLabels,
                };
                self.query = Some(qid);
                Slot::Token(TokenKind::DumpCommand(qid, kind))
            }
            StreamItem::Age(pred) => {
                if exclusive {
                    return Self::reject(qid, RejectReason::Busy);
                }
                self.aging = Some(qid);
                Slot::Token(TokenKind::Aging(pred.clone()))
            }
            StreamItem::AutoAge(c) => {
                if exclusive {
                    return Self::reject(qid, RejectReason::Busy);
                }
                let goal = AutoAgePolicy::new(*c).survivor_goal(self.s_total, self.p as u64, self.k as u64);
                let (search, probe) = ThresholdSearch::toward(qid, goal);
                self.search = Some(Search { qid, search });
                Slot::Query(QueryMessage::Search(probe))
            }
        }
    }

    fn maybe_auto_age(&mut self, tick: u64, head: &mut Bundle) {
        let Some(policy) = self.auto else { return };
        let Some(free) = self.last_free else { return };
        if tick < self.p as u64 || self.aging.is_some() || self.search.is_some() || self.query.is_some() {
            return;
        }
        let level = policy.trigger_level(self.s_total, self.p as u64, self.k as u64, tick);
        if free > level {
            return;
        }
        let qid = QueryId(tick);
        let goal = policy.survivor_goal(self.s_total, self.p as u64, self.k as u64);
        let (search, probe) = ThresholdSearch::toward(qid, goal);
        if let Some(j) = (1..self.k).find(|&j| head.slots[j].is_empty()) {
            head.slots[j] = Slot::Query(QueryMessage::Search(probe));
            self.search = Some(Search { qid, search });
        }
    }
}

