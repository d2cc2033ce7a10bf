//! Per-tick invariant auditor for validate mode.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::model::{BlockId, Bundle, EdgeKey, Slot, TokenKind};
use crate::processor::{AuditEvent, Mode, Processor, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// Sealed processors full of tree edges, none past the builder.
    BuilderPrefix,
    /// Storage fills processors in ring order.
    StorageContiguity,
    /// Builder at or before loader; unresolved only from the loader on.
    AgingOrder,
    /// Untested or unresolved edges outside aging.
    NormalLeftovers,
    SlotConservation,
    Duplication,
    /// A component name not built from blocks consumed on the same processor.
    Nesting,
    /// A primitive vertex consumed by two processors in one epoch.
    PrimitiveReuse,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub tick: u64,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tick {}: {:?}: {}", self.tick, self.kind, self.detail)
    }
}

/// Incremental bookkeeping behind the checks.
#[derive(Debug, Default)]
pub struct Auditor {
    copies: HashMap<EdgeKey, u32>,
    /// (epoch, primitive) to consuming processor.
    consumer: HashMap<(u64, BlockId), usize>,
    /// (name, processor, epoch) for every union result.
    creators: HashSet<(BlockId, usize, u64)>,
    pub violations: Vec<Violation>,
}

impl Auditor {
    pub fn new() -> Self {
        Auditor::default()
    }

    fn flag(&mut self, tick: u64, kind: ViolationKind, detail: String) {
        self.violations.push(Violation { tick, kind, detail });
    }

    /// Number of stored copies of `key` as tracked from audit events.
    pub fn copies(&self, key: EdgeKey) -> u32 {
        self.copies.get(&key).copied().unwrap_or(0)
    }

    /// Whether `name` was produced by a union on processor `i` in `epoch`.
    pub fn created_on(&self, name: BlockId, i: usize, epoch: u64) -> bool {
        self.creators.contains(&(name, i, epoch))
    }

    pub(crate) fn copies_mut(&mut self) -> &mut HashMap<EdgeKey, u32> {
        &mut self.copies
    }

    /// Full-state check from a snapshot: copy counts for every key plus layout.
    pub(crate) fn check_snapshot(&mut self, tick: u64, procs: &[Processor], outs: &[Option<Bundle>], k: usize, aging: bool) {
        let limit = if aging { 2 } else { 1 };
        let mut over: Vec<_> = self.copies.iter().filter(|&(_, &c)| c > limit).map(|(&key, &c)| (key, c)).collect();
        over.sort();
        for (key, c) in over {
            self.flag(tick, ViolationKind::Duplication, format!("{key} stored {c} times"));
        }
        self.check_slots(tick, outs, k);
        self.check_layout(tick, procs, outs, aging);
    }

    fn check_slots(&mut self, tick: u64, outs: &[Option<Bundle>], k: usize) {
        for (i, b) in outs.iter().enumerate() {
            if let Some(b) = b {
                if b.slots.len() != k {
                    self.flag(tick, ViolationKind::SlotConservation, format!("processor {i} emitted {} slots", b.slots.len()));
                }
            }
        }
    }

    /// Fold the tick's events and check every invariant.
    pub fn check(&mut self, tick: u64, procs: &mut [Processor], outs: &[Option<Bundle>], k: usize, aging: bool) {
        let mut touched = Vec::new();
        for (i, proc) in procs.iter_mut().enumerate() {
            let epoch = proc.epoch();
            for ev in proc.take_audit() {
                match ev {
                    AuditEvent::Stored(key) => {
                        *self.copies.entry(key).or_insert(0) += 1;
                        touched.push(key);
                    }
                    AuditEvent::Removed(key) => {
                        if let Some(c) = self.copies.get_mut(&key) {
                            *c = c.saturating_sub(1);
                        }
                    }
                    AuditEvent::Union(name) => {
                        if !proc.components().is_consumed(name) {
                            self.flag(tick, ViolationKind::Nesting, format!("name {name} on processor {i} names no local block"));
                        }
                        self.creators.insert((name, i, epoch));
                    }
                    AuditEvent::ConsumePrimitive(b) => {
                        if let Some(&other) = self.consumer.get(&(epoch, b)) {
                            if other != i {
                                self.flag(tick, ViolationKind::PrimitiveReuse, format!("vertex {b} on {other} and {i}"));
                            }
                        } else {
                            self.consumer.insert((epoch, b), i);
                        }
                    }
                    AuditEvent::Reset => {}
                }
            }
        }
        let limit = if aging { 2 } else { 1 };
        for key in touched {
            let c = self.copies(key);
            if c > limit {
                self.flag(tick, ViolationKind::Duplication, format!("{key} stored {c} times"));
            }
        }
        self.check_slots(tick, outs, k);
        self.check_layout(tick, procs, outs, aging);
    }

    fn check_layout(&mut self, tick: u64, procs: &[Processor], outs: &[Option<Bundle>], aging: bool) {
        let p = procs.len();
        let s = procs[0].capacity();
        let same_epoch = procs.iter().all(|x| x.epoch() == procs[0].epoch());
        if !same_epoch {
            return;
        }
        let builder = procs
            .iter()
            .position(|x| x.role() == Role::Builder)
            .or_else(|| outs.iter().position(|b| b.as_ref().is_some_and(|b| b.builder_token)).map(|i| i + 1))
            .unwrap_or(p);
        for (i, x) in procs.iter().enumerate() {
            if i < builder && (x.role() != Role::Sealed || x.tree_len() != s) {
                self.flag(tick, ViolationKind::BuilderPrefix, format!("processor {i} before builder {builder} holds {} tree edges", x.tree_len()));
            }
            if i > builder && x.tree_len() > 0 {
                self.flag(tick, ViolationKind::BuilderPrefix, format!("processor {i} past builder {builder} holds {} tree edges", x.tree_len()));
            }
        }
        let any_aging = aging || procs.iter().any(|x| x.mode() == Mode::Aging);
        if !any_aging {
            if let Some(first_free) = procs.iter().position(|x| !x.is_full()) {
                for (i, x) in procs.iter().enumerate().skip(first_free + 1) {
                    if x.tree_len() + x.nontree_len() > 0 {
                        self.flag(tick, ViolationKind::StorageContiguity, format!("processor {i} holds edges past first open processor {first_free}"));
                    }
                }
            }
            for (i, x) in procs.iter().enumerate() {
                if x.untested_len() + x.unresolved_len() > 0 {
                    self.flag(tick, ViolationKind::NormalLeftovers, format!("processor {i} holds aging leftovers"));
                }
            }
            return;
        }
        let loader = procs.iter().position(Processor::is_loader).or_else(|| {
            outs.iter()
                .position(|b| {
                    b.as_ref().is_some_and(|b| b.slots.iter().any(|s| matches!(s, Slot::Token(TokenKind::Loader))))
                })
                .map(|i| i + 1)
        });
        let Some(loader) = loader else { return };
        if builder > loader && builder < p {
            self.flag(tick, ViolationKind::AgingOrder, format!("builder {builder} past loader {loader}"));
        }
        for (i, x) in procs.iter().enumerate() {
            if i < loader && x.unresolved_len() > 0 {
                self.flag(tick, ViolationKind::AgingOrder, format!("processor {i} before loader {loader} holds unresolved edges"));
            }
            if i > loader && x.tree_len() + x.nontree_len() > 0 {
                self.flag(tick, ViolationKind::AgingOrder, format!("processor {i} past loader {loader} holds resolved edges"));
            }
        }
    }
}
