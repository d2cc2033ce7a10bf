//! One ring position: stores, roles and the per-tick bundle driver.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::aging::{AgingPredicate, Reservoir, DEFAULT_RESERVOIR};
use crate::model::{
    BlockId, Bundle, EdgeClass, EdgeKey, LabeledEdge, Slot, Timestamp, TokenKind, TransitEdge,
};
use crate::queries::QueryScratch;
use crate::union_find::{LocalComponents, NamingFn};

/// Where a processor sits relative to the builder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Downstream of the builder: stores non-tree and unresolved edges only.
    Downstream,
    /// Currently accepting tree edges.
    Builder,
    /// Upstream of the builder and full of tree edges.
    Sealed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Normal,
    Aging,
}

/// Static configuration of one processor.
#[derive(Clone, Copy, Debug)]
pub struct ProcessorConfig {
    pub index: usize,
    pub p: usize,
    /// Capacity in stored edges (and union operations).
    pub s: usize,
    /// Bundle size.
    pub k: usize,
    pub naming: NamingFn,
    pub reservoir: usize,
    pub seed: u64,
    /// Record [`AuditEvent`]s for the ring auditor.
    pub audit: bool,
}

impl ProcessorConfig {
    pub fn new(index: usize, p: usize, s: usize, k: usize) -> Self {
        ProcessorConfig {
            index,
            p,
            s,
            k,
            naming: NamingFn::MIN,
            reservoir: DEFAULT_RESERVOIR,
            seed: 0,
            audit: false,
        }
    }
}

/// Protocol breakdowns that the invariants should rule out.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProcessorError {
    #[error("processor {index}: no free slot left in the outgoing bundle")]
    SlotOverflow { index: usize },
    #[error("processor {index}: received {got} slots, expected {k}")]
    BundleSize { index: usize, got: usize, k: usize },
    #[error("processor {index}: unclassified edge {key} reached a processor downstream of the builder")]
    FreshDownstream { index: usize, key: EdgeKey },
    #[error("processor {index}: tree edge {key} arrived with nothing to jettison")]
    NoJettison { index: usize, key: EdgeKey },
}

/// State changes reported to the ring auditor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuditEvent {
    Stored(EdgeKey),
    Removed(EdgeKey),
    /// A union produced `name`.
    Union(BlockId),
    /// A block of weight one was consumed.
    ConsumePrimitive(BlockId),
    Reset,
}

/// Which store an accepted edge lands in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum StoreClass {
    Tree,
    NonTree,
    Unresolved,
}

/// Outgoing position for a packed item.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Origin {
    Slot(usize),
    /// Generated without an input slot: first free payload slot, then primary.
    Internal,
}

impl Origin {
    fn is_primary(self) -> bool {
        self == Origin::Slot(0)
    }
}

/// The outgoing bundle under construction.
pub(crate) struct Packer {
    pub(crate) slots: Vec<Slot>,
}

impl Packer {
    pub(crate) fn free_payload(&self) -> usize {
        self.slots[1..].iter().filter(|s| s.is_empty()).count()
    }

    pub(crate) fn free_total(&self) -> usize {
        self.slots.iter().filter(|s| s.is_empty()).count()
    }

    /// Place into a free payload slot only.
    pub(crate) fn pack_payload(&mut self, item: Slot) -> Result<(), Slot> {
        match self.slots[1..].iter().position(Slot::is_empty) {
            Some(i) => {
                self.slots[i + 1] = item;
                Ok(())
            }
            None => Err(item),
        }
    }

    pub(crate) fn pack(&mut self, item: Slot, at: Origin) -> Result<(), Slot> {
        if item.is_empty() {
            return Ok(());
        }
        if let Origin::Slot(j) = at {
            if self.slots[j].is_empty() {
                self.slots[j] = item;
                return Ok(());
            }
        }
        let item = match self.pack_payload(item) {
            Ok(()) => return Ok(()),
            Err(item) => item,
        };
        if self.slots[0].is_empty() {
            self.slots[0] = item;
            Ok(())
        } else {
            Err(item)
        }
    }
}

/// One ring processor.
#[derive(Clone, Debug)]
pub struct Processor {
    pub(crate) index: usize,
    pub(crate) is_head: bool,
    pub(crate) is_tail: bool,
    pub(crate) s: usize,
    pub(crate) k: usize,
    pub(crate) role: Role,
    pub(crate) mode: Mode,
    pub(crate) loader: bool,
    pub(crate) lc: LocalComponents,
    pub(crate) tree: Vec<LabeledEdge>,
    pub(crate) nontree: Vec<LabeledEdge>,
    pub(crate) untested: VecDeque<LabeledEdge>,
    pub(crate) unresolved: Vec<LabeledEdge>,
    pub(crate) dup: HashMap<EdgeKey, Timestamp>,
    pub(crate) reservoir: Reservoir<EdgeKey>,
    pub(crate) predicate: Option<AgingPredicate>,
    pub(crate) epoch: u64,
    pub(crate) query: QueryScratch,
    sealed_now: bool,
    /// Full of tree edges while still loading; the builder role moves on
    /// together with the loader token.
    handoff_pending: bool,
    audit: Option<Vec<AuditEvent>>,
}

impl Processor {
    pub fn new(cfg: ProcessorConfig) -> Self {
        assert!(cfg.p >= 1 && cfg.s >= 1 && cfg.k >= 2, "need p >= 1, s >= 1, k >= 2");
        Processor {
            index: cfg.index,
            is_head: cfg.index == 0,
            is_tail: cfg.index + 1 == cfg.p,
            s: cfg.s,
            k: cfg.k,
            role: if cfg.index == 0 { Role::Builder } else { Role::Downstream },
            mode: Mode::Normal,
            loader: false,
            lc: LocalComponents::new(cfg.s, cfg.naming),
            tree: Vec::new(),
            nontree: Vec::new(),
            untested: VecDeque::new(),
            unresolved: Vec::new(),
            dup: HashMap::new(),
            reservoir: Reservoir::new(cfg.reservoir, cfg.seed.wrapping_add(cfg.index as u64)),
            predicate: None,
            epoch: 0,
            query: QueryScratch::default(),
            sealed_now: false,
            handoff_pending: false,
            audit: cfg.audit.then(Vec::new),
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_loader(&self) -> bool {
        self.loader
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn capacity(&self) -> usize {
        self.s
    }

    pub fn components(&self) -> &LocalComponents {
        &self.lc
    }

    pub fn tree_len(&self) -> usize {
        self.tree.len()
    }

    pub fn nontree_len(&self) -> usize {
        self.nontree.len()
    }

    pub fn untested_len(&self) -> usize {
        self.untested.len()
    }

    pub fn unresolved_len(&self) -> usize {
        self.unresolved.len()
    }

    pub fn stored(&self) -> usize {
        self.tree.len() + self.nontree.len() + self.untested.len() + self.unresolved.len()
    }

    pub fn free_space(&self) -> usize {
        self.s.saturating_sub(self.stored())
    }

    pub fn is_full(&self) -> bool {
        self.stored() >= self.s
    }

    /// Newest timestamp recorded for a stored key.
    pub fn timestamp_of(&self, key: EdgeKey) -> Option<Timestamp> {
        self.dup.get(&key).copied()
    }

    /// Every stored key with its newest timestamp.
    pub fn stored_keys(&self) -> impl Iterator<Item = (EdgeKey, Timestamp)> + '_ {
        self.tree
            .iter()
            .chain(&self.nontree)
            .chain(&self.untested)
            .chain(&self.unresolved)
            .map(move |e| {
                let k = e.key();
                (k, self.dup.get(&k).copied().unwrap_or(e.t))
            })
    }

    /// Tree edges in insertion order.
    pub fn tree_edges(&self) -> &[LabeledEdge] {
        &self.tree
    }

    /// Drain events recorded since the last call.
    pub fn take_audit(&mut self) -> Vec<AuditEvent> {
        self.audit.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Test hook: move one tree edge to `other`'s tree store.
    pub fn fault_move_tree_edge(&mut self, other: &mut Processor) -> bool {
        match self.tree.pop() {
            Some(e) => {
                let k = e.key();
                if let Some(t) = self.dup.remove(&k) {
                    other.dup.insert(k, t);
                }
                other.tree.push(e);
                true
            }
            None => false,
        }
    }

    pub(crate) fn record(&mut self, ev: AuditEvent) {
        if let Some(log) = self.audit.as_mut() {
            log.push(ev);
        }
    }

    fn overflow(&self) -> ProcessorError {
        ProcessorError::SlotOverflow { index: self.index }
    }

    pub(crate) fn pack(&self, out: &mut Packer, item: Slot, at: Origin) -> Result<(), ProcessorError> {
        out.pack(item, at).map_err(|_| self.overflow())
    }

    /// Run one tick on the incoming bundle.
    pub fn process(&mut self, input: Bundle) -> Result<Bundle, ProcessorError> {
        if input.slots.len() != self.k {
            return Err(ProcessorError::BundleSize { index: self.index, got: input.slots.len(), k: self.k });
        }
        self.sealed_now = false;
        let Bundle { slots, builder_token, free_meter } = input;
        let mut out = Packer { slots };

        if builder_token && self.role == Role::Downstream {
            self.role = Role::Builder;
        }
        for j in 0..self.k {
            match &out.slots[j] {
                Slot::Token(TokenKind::Aging(pred)) => {
                    let pred = pred.clone();
                    self.begin_aging(pred);
                }
                Slot::Token(TokenKind::Loader) => {
                    out.slots[j] = Slot::Empty;
                    self.loader = true;
                }
                _ => {}
            }
        }

        for j in 0..self.k {
            match std::mem::take(&mut out.slots[j]) {
                Slot::Empty => {}
                Slot::Edge(te) => self.process_edge(te, Origin::Slot(j), &mut out)?,
                Slot::Query(m) => {
                    if let Some(m) = self.on_query(m) {
                        out.slots[j] = Slot::Query(m);
                    }
                }
                Slot::Token(tok) => {
                    if let Some(tok) = self.on_query_token(tok) {
                        out.slots[j] = Slot::Token(tok);
                    }
                }
            }
        }

        self.aging_phase(&mut out)?;
        self.emit_query(&mut out);

        Ok(Bundle {
            slots: out.slots,
            builder_token: self.sealed_now,
            free_meter: free_meter + self.free_space() as u64,
        })
    }

    /// Reclassify everything as untested and take the aging roles.
    pub fn begin_aging(&mut self, pred: AgingPredicate) {
        self.lc.reset();
        self.record(AuditEvent::Reset);
        self.untested.extend(self.tree.drain(..));
        self.untested.extend(self.nontree.drain(..));
        self.role = if self.is_head { Role::Builder } else { Role::Downstream };
        self.loader = self.is_head;
        self.mode = Mode::Aging;
        self.handoff_pending = false;
        self.predicate = Some(pred);
        self.reservoir.clear();
        self.epoch += 1;
    }

    fn survives(&self, key: EdgeKey, t: Timestamp) -> bool {
        self.predicate.as_ref().is_none_or(|p| p.survives(key, t))
    }

    /// Drop the dup entry of an edge leaving this processor; returns its newest timestamp.
    fn release(&mut self, e: &LabeledEdge) -> Timestamp {
        let key = e.key();
        let t = self.dup.remove(&key).unwrap_or(e.t);
        self.record(AuditEvent::Removed(key));
        t
    }

    fn jettison(&mut self, e: LabeledEdge, class: EdgeClass, at: Origin, out: &mut Packer) -> Result<(), ProcessorError> {
        let t = self.release(&e);
        let mut te = TransitEdge::from_key(e.key(), t, class);
        if class == EdgeClass::NonTree {
            te.edge.lv = te.edge.lu;
        }
        self.pack(out, Slot::Edge(te), at)
    }

    pub(crate) fn process_edge(&mut self, mut te: TransitEdge, at: Origin, out: &mut Packer) -> Result<(), ProcessorError> {
        let key = te.edge.key();
        if let Some(t) = self.dup.get_mut(&key) {
            *t = (*t).max(te.edge.t);
            return Ok(());
        }
        if te.class == EdgeClass::Unresolved {
            if self.is_head {
                te = TransitEdge::from_key(key, te.edge.t, EdgeClass::Fresh);
            } else {
                if at.is_primary() && self.mode == Mode::Aging {
                    self.store_or_forward(te, StoreClass::Unresolved, at, out)?;
                } else {
                    self.pack(out, Slot::Edge(te), at)?;
                }
                return Ok(());
            }
        }
        match self.role {
            Role::Downstream => match te.class {
                EdgeClass::NonTree => {
                    let beyond_loader = self.mode == Mode::Aging && !self.loader;
                    let class = if beyond_loader { StoreClass::Unresolved } else { StoreClass::NonTree };
                    self.store_or_forward(te, class, at, out)
                }
                _ => Err(ProcessorError::FreshDownstream { index: self.index, key }),
            },
            Role::Builder | Role::Sealed => {
                if te.class == EdgeClass::NonTree || te.edge.lu == te.edge.lv {
                    te.class = EdgeClass::NonTree;
                    return self.store_or_forward(te, StoreClass::NonTree, at, out);
                }
                self.process_potential_tree_edge(te, at, out)
            }
        }
    }

    fn refresh_label(&mut self, b: BlockId, size: u64) -> (BlockId, u64) {
        if self.lc.is_consumed(b) {
            let n = self.lc.find(b);
            (n, self.lc.component_size(b).unwrap_or(size))
        } else {
            (b, size)
        }
    }

    fn process_potential_tree_edge(&mut self, mut te: TransitEdge, at: Origin, out: &mut Packer) -> Result<(), ProcessorError> {
        (te.edge.lu, te.size_u) = self.refresh_label(te.edge.lu, te.size_u);
        (te.edge.lv, te.size_v) = self.refresh_label(te.edge.lv, te.size_v);
        if te.edge.lu == te.edge.lv {
            te.class = EdgeClass::NonTree;
            return self.store_or_forward(te, StoreClass::NonTree, at, out);
        }
        match self.role {
            Role::Builder if self.handoff_pending => {
                // no room and the next builder is not yet enabled: recycle through the head
                let te = TransitEdge::from_key(te.edge.key(), te.edge.t, EdgeClass::Unresolved);
                self.pack(out, Slot::Edge(te), at)
            }
            Role::Builder => {
                self.store_or_forward(te, StoreClass::Tree, at, out)?;
                if self.tree.len() >= self.s {
                    if self.loader && self.mode == Mode::Aging {
                        self.handoff_pending = true;
                    } else {
                        self.role = Role::Sealed;
                        self.sealed_now = true;
                    }
                }
                Ok(())
            }
            _ if self.is_tail => self.pack(out, Slot::Token(TokenKind::Fail), at),
            _ => self.pack(out, Slot::Edge(te), at),
        }
    }

    /// Make room by testing one untested edge on the spot.
    fn evict_untested(&mut self, at: Origin, out: &mut Packer) -> Result<bool, ProcessorError> {
        match self.untested.pop_front() {
            Some(x) => {
                let t = self.dup.get(&x.key()).copied().unwrap_or(x.t);
                if self.survives(x.key(), t) {
                    self.jettison(x, EdgeClass::Unresolved, at, out)?;
                } else {
                    self.release(&x);
                }
                Ok(true)
            }
            None => Ok(false),
        }
    }

    fn store_or_forward(&mut self, mut te: TransitEdge, class: StoreClass, at: Origin, out: &mut Packer) -> Result<(), ProcessorError> {
        if self.is_full() {
            let key = te.edge.key();
            if class == StoreClass::Unresolved {
                if self.is_tail {
                    return self.pack(out, Slot::Token(TokenKind::Fail), at);
                }
                te.class = EdgeClass::Unresolved;
                return self.pack(out, Slot::Edge(te), at);
            }
            if let Some(x) = self.unresolved.pop() {
                self.jettison(x, EdgeClass::Unresolved, at, out)?;
            } else if class == StoreClass::NonTree && !self.is_tail {
                te.class = EdgeClass::NonTree;
                return self.pack(out, Slot::Edge(te), at);
            } else if class == StoreClass::Tree && !self.is_tail && !self.nontree.is_empty() {
                let x = self.nontree.pop().expect("checked non-empty");
                self.jettison(x, EdgeClass::NonTree, at, out)?;
            } else if !self.evict_untested(at, out)? {
                if self.is_tail {
                    return self.pack(out, Slot::Token(TokenKind::Fail), at);
                }
                return Err(ProcessorError::NoJettison { index: self.index, key });
            }
        }
        self.accept(te, class);
        Ok(())
    }

    fn accept(&mut self, te: TransitEdge, class: StoreClass) {
        let e = te.edge;
        let key = e.key();
        match class {
            StoreClass::Tree => {
                for (b, w) in [(e.lu, te.size_u), (e.lv, te.size_v)] {
                    if w == 1 && !self.lc.is_consumed(b) {
                        self.record(AuditEvent::ConsumePrimitive(b));
                    }
                }
                let name = self
                    .lc
                    .union_weighted(e.lu, te.size_u, e.lv, te.size_v)
                    .expect("builder holds fewer than s tree edges and labels differ");
                self.record(AuditEvent::Union(name));
                self.tree.push(e);
            }
            StoreClass::NonTree => self.nontree.push(e),
            StoreClass::Unresolved => self.unresolved.push(e),
        }
        self.dup.insert(key, e.t);
        self.reservoir.insert(key);
        self.record(AuditEvent::Stored(key));
    }

    fn pass_loader(&mut self, out: &mut Packer) -> bool {
        if out.pack(Slot::Token(TokenKind::Loader), Origin::Internal).is_ok() {
            if self.handoff_pending {
                self.handoff_pending = false;
                self.role = Role::Sealed;
                self.sealed_now = true;
            }
            self.loader = false;
            self.mode = Mode::Normal;
            self.predicate = None;
            true
        } else {
            false
        }
    }

    /// Test up to `n` untested edges; survivors become unresolved.
    fn test_untested(&mut self, n: usize) {
        for _ in 0..n {
            let Some(x) = self.untested.pop_front() else { break };
            let t = self.dup.get(&x.key()).copied().unwrap_or(x.t);
            if self.survives(x.key(), t) {
                self.unresolved.push(x);
            } else {
                self.release(&x);
            }
        }
    }

    fn aging_phase(&mut self, out: &mut Packer) -> Result<(), ProcessorError> {
        if self.mode != Mode::Aging {
            return Ok(());
        }
        if !self.loader {
            if !self.is_head {
                self.test_untested(self.k - 1);
            }
            return Ok(());
        }
        if self.is_head {
            return self.head_resolution(out);
        }
        self.test_untested(self.k - 1);
        while out.free_payload() > 0 {
            let Some(x) = self.unresolved.pop() else { break };
            let t = self.release(&x);
            let te = TransitEdge::from_key(x.key(), t, EdgeClass::Unresolved);
            out.pack_payload(Slot::Edge(te)).map_err(|_| self.overflow())?;
        }
        if self.untested.is_empty() && self.unresolved.is_empty() {
            self.pass_loader(out);
        }
        Ok(())
    }

    fn head_resolution(&mut self, out: &mut Packer) -> Result<(), ProcessorError> {
        for i in 1..self.k {
            if out.free_total() == 0 {
                return Ok(());
            }
            let Some(x) = self.untested.pop_front() else {
                self.pass_loader(out);
                return Ok(());
            };
            let t = self.release(&x);
            let key = x.key();
            if !self.survives(key, t) {
                continue;
            }
            if i == self.k - 1 && self.stored() + 1 >= self.s {
                let te = TransitEdge::from_key(key, t, EdgeClass::Unresolved);
                let at = if out.slots[0].is_empty() { Origin::Slot(0) } else { Origin::Internal };
                self.pack(out, Slot::Edge(te), at)?;
            } else {
                let te = TransitEdge::from_key(key, t, EdgeClass::Fresh);
                self.process_edge(te, Origin::Internal, out)?;
            }
        }
        if self.untested.is_empty() {
            self.pass_loader(out);
        }
        Ok(())
    }
}
