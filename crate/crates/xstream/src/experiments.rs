//! Desk-scale harnesses: normal-mode throughput, a single-aging (c, d)
//! sweep, and a long auto-aging run with storage metrics.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use crate::aging::{min_bandwidth_expansion, required_free_space, AgingPredicate, AutoAgePolicy};
use crate::gen;
use crate::model::{EdgeKey, StreamItem, Timestamp};
use crate::pipelined::PipelinedRing;
use crate::ring::{OutputResult, Ring, RingConfig, RingError, TranscriptEvent};
use crate::stream::parse_line;

/// Edges per second over a plain edge stream.
#[derive(Clone, Debug)]
pub struct ThroughputReport {
    pub engine: &'static str,
    pub edges: usize,
    pub ticks: u64,
    pub elapsed: Duration,
}

impl ThroughputReport {
    pub fn edges_per_sec(&self) -> f64 {
        self.edges as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

/// Normal-mode throughput on either engine. Reported, never asserted.
pub fn throughput(cfg: RingConfig, edges: &[(u64, u64)], pipelined: bool) -> Result<ThroughputReport, RingError> {
    let items = gen::as_items(edges);
    let start = Instant::now();
    let (engine, ticks) = if pipelined {
        let mut ring = PipelinedRing::new(cfg)?;
        ring.run(items)?;
        let n = ring.transcript().events.iter().filter(|e| matches!(e, TranscriptEvent::In { .. })).count();
        ("pipelined", n as u64)
    } else {
        let mut ring = Ring::new(cfg)?;
        ring.run(items)?;
        ("lockstep", ring.now())
    };
    Ok(ThroughputReport { engine, edges: edges.len(), ticks, elapsed: start.elapsed() })
}

/// When the controller issues the aging command.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lead {
    /// Free space at or below the worst-case requirement for aging.
    Sufficient,
    /// Free space at or below a fixed number of slots.
    Late(u64),
}

/// One cell of the single-aging sweep.
#[derive(Clone, Copy, Debug)]
pub struct CellParams {
    pub c: f64,
    pub d: f64,
    pub u: f64,
    pub p: usize,
    pub s: usize,
    /// Bundle size; `None` takes the smallest sufficient value.
    pub k: Option<usize>,
    pub lead: Lead,
    /// Aging events to run.
    pub cycles: usize,
    pub seed: u64,
    pub validate: bool,
}

impl CellParams {
    pub fn new(c: f64, d: f64, u: f64, p: usize, s: usize) -> Self {
        CellParams { c, d, u, p, s, k: None, lead: Lead::Sufficient, cycles: 3, seed: 1, validate: false }
    }

    pub fn k_min(&self) -> f64 {
        min_bandwidth_expansion(self.c, self.d, self.u, self.p as f64).unwrap_or(f64::INFINITY)
    }

    pub fn bundle(&self) -> usize {
        self.k.unwrap_or_else(|| (self.k_min().ceil() as usize).max(2))
    }

    fn trigger(&self) -> u64 {
        let s_total = (self.p * self.s) as u64;
        match self.lead {
            Lead::Sufficient => required_free_space(self.c, s_total, self.p as u64, self.bundle() as u64),
            Lead::Late(n) => n,
        }
    }
}

/// What one aging event left behind.
#[derive(Clone, Debug, PartialEq)]
pub struct AgingEvent {
    pub issued: u64,
    pub threshold: u64,
    pub finished: u64,
    pub stored_after: usize,
    /// Keys the predicate should have kept that the ring no longer holds.
    pub dropped: usize,
    /// Keys the ring holds that the predicate should have removed.
    pub extra: usize,
}

/// Outcome of one sweep cell.
#[derive(Clone, Debug)]
pub struct CellReport {
    pub params: CellParams,
    pub k: usize,
    pub k_min: f64,
    pub failed_at: Option<u64>,
    pub events: Vec<AgingEvent>,
    /// Aging ticks over all ticks between the first and last completed aging.
    pub downtime: Option<f64>,
    pub violations: usize,
    /// The first few audit findings, rendered.
    pub first_violations: Vec<String>,
    pub ticks: u64,
}

impl CellReport {
    pub fn dropped(&self) -> usize {
        self.events.iter().map(|e| e.dropped).sum()
    }
}

/// Active-edge bookkeeping driven from the transcript's input lines.
#[derive(Default)]
struct Tracker {
    active: HashMap<EdgeKey, u64>,
    cursor: usize,
}

impl Tracker {
    fn catch_up(&mut self, ring: &Ring) {
        let events = &ring.transcript().events;
        for e in &events[self.cursor..] {
            if let TranscriptEvent::In { tick, item } = e {
                match parse_line(item) {
                    Ok(Some(StreamItem::Edge(u, v))) => {
                        self.active.insert(EdgeKey::new(u, v), *tick);
                    }
                    Ok(Some(StreamItem::Age(pred))) => self.active.retain(|k, t| pred.survives(*k, Timestamp(*t))),
                    _ => {}
                }
            }
        }
        self.cursor = events.len();
    }
}

fn ring_keys(ring: &Ring) -> HashSet<EdgeKey> {
    let mut keys: HashSet<EdgeKey> = ring.stored_edges().into_iter().map(|e| e.key).collect();
    keys.extend(ring.transit_edges().into_iter().map(|e| e.edge.key()));
    keys
}

/// Threshold that keeps about `goal` of the currently stored edges.
fn threshold_for(ring: &Ring, goal: usize) -> u64 {
    let mut ts: Vec<u64> = ring.stored_edges().into_iter().map(|e| e.t.0).collect();
    ts.sort_unstable_by(|a, b| b.cmp(a));
    match ts.get(goal.saturating_sub(1)) {
        Some(&t) if goal > 0 => t,
        _ => ts.last().copied().unwrap_or(0),
    }
}

/// Run repeated single aging events: fill until free space reaches the
/// lead level, age down to about `c * S` and keep streaming throughout.
pub fn aging_cell(params: CellParams) -> CellReport {
    let k = params.bundle();
    let mut cfg = RingConfig::new(params.p, params.s, k);
    cfg.validate = params.validate;
    cfg.seed = params.seed;
    let s_total = params.p * params.s;
    let trigger = params.trigger();
    let goal = (params.c * s_total as f64).round() as usize;
    let vertices = (s_total as u64 * 4).max(64);
    let budget = s_total * (params.cycles + 2) * 4;
    let edges = gen::uniform(budget, vertices, params.u, gen::DEFAULT_WINDOW, params.seed);

    let mut report = CellReport {
        params,
        k,
        k_min: params.k_min(),
        failed_at: None,
        events: Vec::new(),
        downtime: None,
        violations: 0,
        first_violations: Vec::new(),
        ticks: 0,
    };
    let mut ring = match Ring::new(cfg) {
        Ok(r) => r,
        Err(_) => return report,
    };
    let mut tracker = Tracker::default();
    let mut next = edges.into_iter();
    let mut open: Option<(u64, u64)> = None;
    let (mut aging_ticks, mut window_start) = (0u64, None::<u64>);

    while report.events.len() < params.cycles {
        let now = ring.now();
        let item = if open.is_none() && !ring.io().is_busy() && ring.free_space() as u64 <= trigger {
            let th = threshold_for(&ring, goal);
            open = Some((now, th));
            StreamItem::Age(AgingPredicate::Threshold(Timestamp(th)))
        } else {
            match next.next() {
                Some((u, v)) => StreamItem::edge(u, v),
                None => break,
            }
        };
        let aging_before = ring.io().aging_active();
        let outputs = match ring.tick(Some(item)) {
            Ok(o) => o,
            Err(RingError::SystemFailed { tick }) => {
                report.failed_at = Some(tick);
                break;
            }
            Err(RingError::Protocol { tick, .. }) => {
                report.failed_at = Some(tick);
                break;
            }
            Err(RingError::Config(_)) => break,
        };
        if window_start.is_some() && aging_before {
            aging_ticks += 1;
        }
        tracker.catch_up(&ring);
        if outputs.iter().any(|o| o.result == OutputResult::Aged) {
            let (issued, threshold) = open.take().expect("aging was issued");
            let actual = ring_keys(&ring);
            let dropped = tracker.active.keys().filter(|k| !actual.contains(k)).count();
            let extra = actual.iter().filter(|k| !tracker.active.contains_key(k)).count();
            report.events.push(AgingEvent {
                issued,
                threshold,
                finished: now,
                stored_after: ring.stored_total(),
                dropped,
                extra,
            });
            if let Some(start) = window_start {
                report.downtime = Some(aging_ticks as f64 / (now + 1 - start) as f64);
            } else {
                window_start = Some(now + 1);
            }
        }
    }
    report.ticks = ring.now();
    report.violations = ring.violations().len();
    report.first_violations = ring.violations().iter().take(5).map(ToString::to_string).collect();
    report
}

/// Sample of the storage series around auto-aging.
#[derive(Clone, Debug)]
pub struct AutoAgeReport {
    pub s_total: usize,
    pub c: f64,
    /// (tick, stored total) at every tick.
    pub series: Vec<(u64, usize)>,
    /// (tick, stored total) whenever an aging event completes.
    pub after_aging: Vec<(u64, usize)>,
    pub thresholds: Vec<Option<Timestamp>>,
    pub failed_at: Option<u64>,
    pub violations: usize,
    pub elapsed: Duration,
}

impl AutoAgeReport {
    /// Largest relative deviation of post-aging storage from `c * S`.
    pub fn worst_deviation(&self) -> f64 {
        let goal = self.c * self.s_total as f64;
        self.after_aging.iter().map(|&(_, s)| (s as f64 - goal).abs() / goal).fold(0.0, f64::max)
    }
}

/// Long auto-aging run over `n` unique edges.
pub fn auto_age_run(mut cfg: RingConfig, c: f64, n: usize, seed: u64) -> AutoAgeReport {
    if cfg.auto_age.is_none() {
        cfg.auto_age = Some(AutoAgePolicy::new(c));
    }
    let s_total = cfg.total_capacity();
    let edges = gen::uniform(n, (n as u64 * 4).max(64), 1.0, gen::DEFAULT_WINDOW, seed);
    let start = Instant::now();
    let mut report = AutoAgeReport {
        s_total,
        c,
        series: Vec::with_capacity(n),
        after_aging: Vec::new(),
        thresholds: Vec::new(),
        failed_at: None,
        violations: 0,
        elapsed: Duration::ZERO,
    };
    let mut ring = match Ring::new(cfg) {
        Ok(r) => r,
        Err(_) => return report,
    };
    let cap = ring.config().drain_cap();
    let mut items = edges.into_iter().map(|(u, v)| StreamItem::edge(u, v));
    let mut idle = 0u64;
    loop {
        let item = items.next();
        if item.is_none() {
            if idle >= cap || (idle >= ring.config().p as u64 && ring.io().is_quiescent()) {
                break;
            }
            idle += 1;
        }
        let now = ring.now();
        match ring.tick(item) {
            Ok(outputs) => {
                for o in outputs {
                    match o.result {
                        OutputResult::Aged => report.after_aging.push((now, ring.stored_total())),
                        OutputResult::AutoAge(t) => report.thresholds.push(t),
                        _ => {}
                    }
                }
            }
            Err(e) => {
                report.failed_at = Some(match e {
                    RingError::SystemFailed { tick } | RingError::Protocol { tick, .. } => tick,
                    RingError::Config(_) => now,
                });
                break;
            }
        }
        report.series.push((now, ring.stored_total()));
    }
    report.violations = ring.violations().len();
    report.elapsed = start.elapsed();
    report
}
