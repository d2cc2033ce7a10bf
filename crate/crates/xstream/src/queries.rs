//! Per-processor query handling: constant queries fold into their message
//! as it passes; non-constant queries emit local state behind upstream output.

use std::collections::VecDeque;

use crate::model::{DumpKind, QueryId, QueryMessage, SearchProbe, Slot, TokenKind, VertexId};
use crate::processor::{Processor, Role};

/// Local progress of the active non-constant query.
#[derive(Clone, Debug, Default)]
pub(crate) struct QueryScratch {
    active: Option<ActiveQuery>,
}

#[derive(Clone, Debug)]
struct ActiveQuery {
    qid: QueryId,
    kind: DumpKind,
    /// 1 or 2; only small-component queries reach phase 2.
    phase: u8,
    upstream_done: bool,
    started: bool,
    queue: VecDeque<QueryMessage>,
}

impl ActiveQuery {
    fn end_token(&self) -> TokenKind {
        match (self.kind, self.phase) {
            (DumpKind::SmallComponents(_), 1) => TokenKind::QueryPhaseDone(self.qid),
            _ => TokenKind::QueryDone(self.qid),
        }
    }
}

impl Processor {
    fn lambda(&self) -> Option<u64> {
        match self.query.active.as_ref()?.kind {
            DumpKind::SmallComponents(l) => Some(l),
            _ => None,
        }
    }

    /// Fold this processor into a passing query message; `None` absorbs it.
    pub(crate) fn on_query(&mut self, m: QueryMessage) -> Option<QueryMessage> {
        match m {
            QueryMessage::Conn { qid, u, v, lu, lv, answer, busy } => {
                if busy || answer {
                    return Some(QueryMessage::Conn { qid, u, v, lu, lv, answer, busy });
                }
                let (lu, lv) = (self.lc.find(lu), self.lc.find(lv));
                Some(QueryMessage::Conn { qid, u, v, lu, lv, answer: lu == lv, busy })
            }
            QueryMessage::EdgeCount { qid, n, busy } => {
                let n = if busy { n } else { n + self.stored() as u64 };
                Some(QueryMessage::EdgeCount { qid, n, busy })
            }
            QueryMessage::MaxComponent { qid, best, busy } => {
                let best = if busy { best } else { best.max(self.lc.max_component_size()) };
                Some(QueryMessage::MaxComponent { qid, best, busy })
            }
            QueryMessage::DumpPair { qid, block, label } => {
                Some(QueryMessage::DumpPair { qid, block, label: self.lc.find(label) })
            }
            QueryMessage::Size { name, .. } if self.lc.is_consumed(name) => None,
            QueryMessage::Vertex { qid, name, v } if self.lc.is_consumed(name) => {
                let size = self.lc.component_size(name).unwrap_or(0);
                if self.lambda().is_some_and(|l| size > l) {
                    return None;
                }
                Some(QueryMessage::Vertex { qid, name: self.lc.find(name), v })
            }
            QueryMessage::Search(mut probe) => {
                self.fold_search(&mut probe);
                Some(QueryMessage::Search(probe))
            }
            other => Some(other),
        }
    }

    /// Add this processor's share to a threshold-search probe.
    fn fold_search(&self, probe: &mut SearchProbe) {
        let stored = self.stored() as u64;
        if probe.phase == 0 {
            probe.stored += stored;
            for &t in self.dup.values() {
                probe.min_t = probe.min_t.min(t.0);
                probe.max_t = probe.max_t.max(t.0);
            }
            return;
        }
        if stored == 0 {
            return;
        }
        let live: Vec<_> = self
            .reservoir
            .samples()
            .iter()
            .filter_map(|k| self.dup.get(k))
            .collect();
        let frac = if live.is_empty() {
            0.5
        } else {
            live.iter().filter(|t| ***t >= probe.candidate).count() as f64 / live.len() as f64
        };
        probe.estimate += stored as f64 * frac;
    }

    /// Handle non-edge tokens in the slot pass; `None` holds the token back.
    pub(crate) fn on_query_token(&mut self, tok: TokenKind) -> Option<TokenKind> {
        match tok {
            TokenKind::DumpCommand(qid, kind) => {
                self.query.active = Some(ActiveQuery {
                    qid,
                    kind,
                    phase: 1,
                    upstream_done: self.is_head,
                    started: false,
                    queue: VecDeque::new(),
                });
                Some(TokenKind::DumpCommand(qid, kind))
            }
            TokenKind::QueryPhaseDone(qid) | TokenKind::QueryDone(qid) => {
                match self.query.active.as_mut() {
                    Some(a) if a.qid == qid => {
                        if self.is_head && matches!(tok, TokenKind::QueryPhaseDone(_)) {
                            // Phase 1 has circled the ring; the head opens phase 2.
                            a.phase = 2;
                            a.started = false;
                        }
                        a.upstream_done = true;
                        None
                    }
                    _ => Some(tok),
                }
            }
            other => Some(other),
        }
    }

    fn local_output(&self, a: &ActiveQuery) -> VecDeque<QueryMessage> {
        let qid = a.qid;
        match (a.kind, a.phase) {
            (DumpKind::ComponentLabels, _) => self
                .lc
                .pairs()
                .into_iter()
                .map(|(block, label)| QueryMessage::DumpPair { qid, block, label })
                .collect(),
            (DumpKind::SpanningTree, _) => {
                self.tree.iter().map(|e| QueryMessage::TreeEdge { qid, key: e.key() }).collect()
            }
            (DumpKind::SmallComponents(l), 1) => self
                .lc
                .components()
                .into_iter()
                .filter(|&(_, n)| n <= l)
                .map(|(name, size)| QueryMessage::Size { qid, name, size })
                .collect(),
            (DumpKind::SmallComponents(l), _) => self
                .lc
                .primitive_members()
                .into_iter()
                .filter(|&(b, _)| self.lc.component_size(b).is_some_and(|n| n <= l))
                .map(|(b, name)| QueryMessage::Vertex { qid, name, v: VertexId(b.0) })
                .collect(),
        }
    }

    /// Pack queued local output into free payload slots, then the end token.
    pub(crate) fn emit_query(&mut self, out: &mut crate::processor::Packer) {
        let Some(mut a) = self.query.active.take() else { return };
        if !a.upstream_done {
            self.query.active = Some(a);
            return;
        }
        if !a.started {
            a.queue = self.local_output(&a);
            a.started = true;
        }
        while let Some(m) = a.queue.pop_front() {
            if let Err(Slot::Query(m)) = out.pack_payload(Slot::Query(m)) {
                a.queue.push_front(m);
                self.query.active = Some(a);
                return;
            }
        }
        let end = a.end_token();
        if out.pack_payload(Slot::Token(end.clone())).is_err() {
            self.query.active = Some(a);
            return;
        }
        match end {
            TokenKind::QueryPhaseDone(_) => {
                a.phase = 2;
                a.started = false;
                a.upstream_done = false;
                self.query.active = Some(a);
            }
            _ => self.query.active = None,
        }
    }

    /// Whether this processor is upstream of the builder.
    pub fn is_sealed(&self) -> bool {
        self.role == Role::Sealed
    }
}
