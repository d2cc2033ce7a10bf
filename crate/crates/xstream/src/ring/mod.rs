//! The ring: I/O processor, processor chain, tick clock, transcript,
//! metrics, hop taps and the validate-mode auditor.

pub mod audit;
pub mod io;
pub mod transcript;

use thiserror::Error;

use crate::aging::{AutoAgePolicy, DEFAULT_RESERVOIR};
use crate::model::{BlockId, Bundle, EdgeClass, EdgeKey, LabeledEdge, QueryMessage, Slot, StreamItem, Timestamp, TransitEdge};
use crate::processor::{Mode, Processor, ProcessorConfig, ProcessorError, Role};
use crate::stream::render_item;
use crate::union_find::NamingFn;

pub use audit::{Auditor, Violation, ViolationKind};
pub use io::{IoProcessor, IoTick};
pub use transcript::{OutputEvent, OutputResult, Transcript, TranscriptEvent};

/// Run-level configuration.
#[derive(Clone, Copy, Debug)]
pub struct RingConfig {
    pub p: usize,
    pub s: usize,
    pub k: usize,
    pub naming: NamingFn,
    /// Audit every tick.
    pub validate: bool,
    pub seed: u64,
    pub reservoir: usize,
    pub auto_age: Option<AutoAgePolicy>,
    /// Record per-processor output streams.
    pub taps: bool,
    /// Record a [`MetricsRow`] per tick.
    pub metrics: bool,
}

impl RingConfig {
    pub fn new(p: usize, s: usize, k: usize) -> Self {
        RingConfig {
            p,
            s,
            k,
            naming: NamingFn::MIN,
            validate: false,
            seed: 0,
            reservoir: DEFAULT_RESERVOIR,
            auto_age: None,
            taps: false,
            metrics: false,
        }
    }

    pub fn total_capacity(&self) -> usize {
        self.p * self.s
    }

    pub fn check(&self) -> Result<(), RingError> {
        if self.p == 0 || self.s == 0 || self.k < 2 {
            return Err(RingError::Config(format!(
                "need p >= 1, s >= 1, k >= 2 (got p={}, s={}, k={})",
                self.p, self.s, self.k
            )));
        }
        Ok(())
    }

    /// Tick budget for draining after the stream ends.
    pub fn drain_cap(&self) -> u64 {
        let (p, k) = (self.p as u64, self.k as u64);
        let s_total = self.total_capacity() as u64;
        4 * p + 4 * s_total.div_ceil(k - 1) + 16
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("system failed at tick {tick}: storage exhausted")]
    SystemFailed { tick: u64 },
    #[error("protocol fault at tick {tick}: {source}")]
    Protocol {
        tick: u64,
        #[source]
        source: ProcessorError,
    },
}

/// Ring-wide storage snapshot for one tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricsRow {
    pub tick: u64,
    pub mode: &'static str,
    pub stored_total: usize,
    pub tree_total: usize,
    pub nontree_total: usize,
    pub untested_total: usize,
    pub unresolved_total: usize,
    pub builder_index: Option<usize>,
    pub loader_index: Option<usize>,
    pub free_space: usize,
}

impl MetricsRow {
    pub const HEADER: [&'static str; 10] = [
        "tick",
        "mode",
        "stored_total",
        "tree_total",
        "nontree_total",
        "untested_total",
        "unresolved_total",
        "builder_index",
        "loader_index",
        "free_space",
    ];

    pub fn fields(&self) -> [String; 10] {
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        [
            self.tick.to_string(),
            self.mode.to_string(),
            self.stored_total.to_string(),
            self.tree_total.to_string(),
            self.nontree_total.to_string(),
            self.untested_total.to_string(),
            self.unresolved_total.to_string(),
            opt(self.builder_index),
            opt(self.loader_index),
            self.free_space.to_string(),
        ]
    }
}

/// Streams observed on each processor's output link.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HopTaps {
    /// Unclassified edges emitted by processor `i`.
    pub edges: Vec<Vec<LabeledEdge>>,
    /// Dump pairs emitted by processor `i`.
    pub pairs: Vec<Vec<(BlockId, BlockId)>>,
}

/// One stored copy of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoredEdge {
    pub key: EdgeKey,
    pub t: Timestamp,
    pub processor: usize,
}

/// The lockstep engine.
#[derive(Debug)]
pub struct Ring {
    cfg: RingConfig,
    procs: Vec<Processor>,
    links: Vec<Option<Bundle>>,
    io: IoProcessor,
    tick: u64,
    transcript: Transcript,
    auditor: Option<Auditor>,
    taps: Option<HopTaps>,
    metrics: Vec<MetricsRow>,
    failed: Option<u64>,
    aging_ticks: u64,
    deferrals: u64,
}

/// Processors for a configuration, shared with the pipelined engine.
pub(crate) fn build_processors(cfg: &RingConfig) -> Vec<Processor> {
    (0..cfg.p)
        .map(|i| {
            Processor::new(ProcessorConfig {
                index: i,
                p: cfg.p,
                s: cfg.s,
                k: cfg.k,
                naming: cfg.naming,
                reservoir: cfg.reservoir,
                seed: cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15),
                audit: cfg.validate,
            })
        })
        .collect()
}

/// Transcript lines for one tick at the I/O processor.
pub(crate) fn log_tick(transcript: &mut Transcript, tick: u64, io: &IoTick) {
    let item = io.injected.as_ref().map(render_item).unwrap_or_else(|| "NOP".into());
    transcript.events.push(TranscriptEvent::In { tick, item });
    transcript.events.extend(io.outputs.iter().cloned().map(TranscriptEvent::Out));
}

impl Ring {
    pub fn new(cfg: RingConfig) -> Result<Self, RingError> {
        cfg.check()?;
        Ok(Ring {
            procs: build_processors(&cfg),
            links: vec![None; cfg.p],
            io: IoProcessor::new(cfg.k, cfg.p, cfg.total_capacity() as u64, cfg.auto_age),
            tick: 0,
            transcript: Transcript::default(),
            auditor: cfg.validate.then(Auditor::new),
            taps: cfg.taps.then(|| HopTaps {
                edges: vec![Vec::new(); cfg.p],
                pairs: vec![Vec::new(); cfg.p],
            }),
            metrics: Vec::new(),
            failed: None,
            aging_ticks: 0,
            deferrals: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &RingConfig {
        &self.cfg
    }

    /// Index of the next tick.
    pub fn now(&self) -> u64 {
        self.tick
    }

    pub fn processors(&self) -> &[Processor] {
        &self.procs
    }

    pub fn io(&self) -> &IoProcessor {
        &self.io
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn violations(&self) -> &[Violation] {
        self.auditor.as_ref().map(|a| a.violations.as_slice()).unwrap_or(&[])
    }

    pub fn auditor(&self) -> Option<&Auditor> {
        self.auditor.as_ref()
    }

    pub fn taps(&self) -> Option<&HopTaps> {
        self.taps.as_ref()
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    /// Ticks whose injection happened while aging was active.
    pub fn aging_ticks(&self) -> u64 {
        self.aging_ticks
    }

    /// Ticks whose stream item was held back by a returning primary edge.
    pub fn deferrals(&self) -> u64 {
        self.deferrals
    }

    pub fn failed_at(&self) -> Option<u64> {
        self.failed
    }

    pub fn stored_total(&self) -> usize {
        self.procs.iter().map(Processor::stored).sum()
    }

    pub fn free_space(&self) -> usize {
        self.cfg.total_capacity() - self.stored_total()
    }

    /// Every stored copy, ring order.
    pub fn stored_edges(&self) -> Vec<StoredEdge> {
        self.procs
            .iter()
            .flat_map(|x| x.stored_keys().map(move |(key, t)| StoredEdge { key, t, processor: x.index() }))
            .collect()
    }

    /// Edges currently riding between processors.
    pub fn transit_edges(&self) -> Vec<TransitEdge> {
        self.links.iter().flatten().flat_map(|b| b.edges().copied()).collect()
    }

    /// Whether nothing is owed, judged from the I/O processor alone so
    /// every engine drains for the same number of ticks.
    pub fn is_quiescent(&self) -> bool {
        self.io.is_quiescent()
    }

    /// Run invariant checks now, independent of validate mode.
    pub fn audit_invariants(&mut self) -> Vec<Violation> {
        let mut a = Auditor::new();
        for x in &self.procs {
            for (key, _) in x.stored_keys() {
                *a.copies_mut().entry(key).or_insert(0) += 1;
            }
        }
        a.check_snapshot(self.tick, &self.procs, &self.links, self.cfg.k, self.io.aging_active());
        a.violations
    }

    /// Test hook: move a tree edge from the builder side to past the builder.
    pub fn inject_fault_tree_downstream(&mut self) -> bool {
        let Some(src) = self.procs.iter().rposition(|x| x.tree_len() > 0) else { return false };
        let Some(dst) = self.procs.iter().position(|x| x.role() == Role::Downstream && x.index() > src) else {
            return false;
        };
        let (a, b) = self.procs.split_at_mut(dst);
        a[src].fault_move_tree_edge(&mut b[0])
    }

    /// Advance one tick with an optional stream item.
    pub fn tick(&mut self, item: Option<StreamItem>) -> Result<Vec<OutputEvent>, RingError> {
        if let Some(tick) = self.failed {
            return Err(RingError::SystemFailed { tick });
        }
        let t = self.tick;
        let p = self.cfg.p;
        let returning = self.links[p - 1].take();
        let aging_before = self.io.aging_active();
        let (head_in, io) = self.io.begin_tick(t, returning, item);
        log_tick(&mut self.transcript, t, &io);
        if aging_before && io.injected.is_some() {
            self.aging_ticks += 1;
        }
        self.deferrals += u64::from(io.deferred);
        if io.failed {
            self.failed = Some(t);
            self.tick += 1;
            return Err(RingError::SystemFailed { tick: t });
        }
        let protocol = |source| RingError::Protocol { tick: t, source };
        for i in (1..p).rev() {
            let input = self.links[i - 1].take().unwrap_or_else(|| Bundle::empty(self.cfg.k));
            self.links[i] = Some(self.procs[i].process(input).map_err(protocol)?);
        }
        self.links[0] = Some(self.procs[0].process(head_in).map_err(protocol)?);
        self.after_tick(t);
        self.tick += 1;
        Ok(io.outputs)
    }

    fn after_tick(&mut self, t: u64) {
        if let Some(taps) = self.taps.as_mut() {
            for (i, b) in self.links.iter().enumerate() {
                let Some(b) = b else { continue };
                for slot in &b.slots {
                    match slot {
                        Slot::Edge(e) if e.class == EdgeClass::Fresh => taps.edges[i].push(e.edge),
                        Slot::Query(QueryMessage::DumpPair { block, label, .. }) => taps.pairs[i].push((*block, *label)),
                        _ => {}
                    }
                }
            }
        }
        if let Some(a) = self.auditor.as_mut() {
            a.check(t, &mut self.procs, &self.links, self.cfg.k, self.io.aging_active());
        }
        if self.cfg.metrics {
            let row = self.metrics_row(t);
            self.metrics.push(row);
        }
    }

    pub fn metrics_row(&self, tick: u64) -> MetricsRow {
        let sum = |f: fn(&Processor) -> usize| self.procs.iter().map(f).sum::<usize>();
        let stored_total = self.stored_total();
        let aging = self.io.aging_active() || self.procs.iter().any(|x| x.mode() == Mode::Aging);
        MetricsRow {
            tick,
            mode: if aging { "aging" } else { "normal" },
            stored_total,
            tree_total: sum(Processor::tree_len),
            nontree_total: sum(Processor::nontree_len),
            untested_total: sum(Processor::untested_len),
            unresolved_total: sum(Processor::unresolved_len),
            builder_index: self.procs.iter().position(|x| x.role() == Role::Builder),
            loader_index: self.procs.iter().position(Processor::is_loader),
            free_space: self.cfg.total_capacity() - stored_total,
        }
    }

    /// Idle ticks until quiescent: at least `p`, at most [`RingConfig::drain_cap`].
    pub fn drain(&mut self) -> Result<(), RingError> {
        let cap = self.cfg.drain_cap();
        let mut n = 0u64;
        while n < self.cfg.p as u64 || (!self.is_quiescent() && n < cap) {
            self.tick(None)?;
            n += 1;
        }
        Ok(())
    }

    /// Feed every item, one per tick, then drain.
    pub fn run<I: IntoIterator<Item = StreamItem>>(&mut self, items: I) -> Result<(), RingError> {
        for item in items {
            self.tick(Some(item))?;
        }
        self.drain()
    }
}

/// Run a whole stream on a fresh lockstep ring and return the transcript.
pub fn run_stream<I: IntoIterator<Item = StreamItem>>(cfg: RingConfig, items: I) -> Result<Transcript, RingError> {
    let mut ring = Ring::new(cfg)?;
    ring.run(items)?;
    Ok(ring.into_transcript())
}
