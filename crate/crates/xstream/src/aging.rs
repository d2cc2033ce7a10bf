//! Aging predicates, the sizing formulas for infinite runs, reservoir
//! sampling and the threshold search driven by the I/O processor.

use std::fmt;
use std::sync::Arc;

use num_traits::{Float, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{EdgeKey, QueryId, SearchProbe, Timestamp};

/// Default reservoir size per processor.
pub const DEFAULT_RESERVOIR: usize = 100;

/// Default multiplier on the required free space before auto-aging fires.
pub const DEFAULT_MARGIN: f64 = 1.25;

/// Failures in aging configuration or control.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum AgingError {
    #[error("degenerate parameters: c must be below 1 and d above 0")]
    DegenerateParams,
    #[error("parameter out of range: {0}")]
    OutOfRange(&'static str),
    #[error("no edges stored")]
    EmptySystem,
}

type KeepFn = dyn Fn(EdgeKey, Timestamp) -> bool + Send + Sync;

/// Survival test applied to every stored edge during aging.
#[derive(Clone)]
pub enum AgingPredicate {
    /// Keep edges whose newest timestamp is at least the threshold.
    Threshold(Timestamp),
    /// Arbitrary pure test; `true` keeps the edge.
    Custom { name: String, keep: Arc<KeepFn> },
}

impl AgingPredicate {
    pub fn custom<F>(name: impl Into<String>, keep: F) -> Self
    where
        F: Fn(EdgeKey, Timestamp) -> bool + Send + Sync + 'static,
    {
        AgingPredicate::Custom { name: name.into(), keep: Arc::new(keep) }
    }

    pub fn survives(&self, key: EdgeKey, t: Timestamp) -> bool {
        match self {
            AgingPredicate::Threshold(ta) => t >= *ta,
            AgingPredicate::Custom { keep, .. } => keep(key, t),
        }
    }
}

impl fmt::Debug for AgingPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgingPredicate::Threshold(t) => write!(f, "Threshold({})", t.0),
            AgingPredicate::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl PartialEq for AgingPredicate {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (AgingPredicate::Threshold(a), AgingPredicate::Threshold(b)) => a == b,
            (
                AgingPredicate::Custom { name: n1, keep: k1 },
                AgingPredicate::Custom { name: n2, keep: k2 },
            ) => n1 == n2 && Arc::ptr_eq(k1, k2),
            _ => false,
        }
    }
}

/// Smallest bundle size for which aging provably finishes before the
/// system fills: `1 + (c p + 1) u / (d p (1 - c))`.
pub fn min_bandwidth_expansion<F: Float>(c: F, d: F, u: F, p: F) -> Result<F, AgingError> {
    let zero = F::zero();
    let one = F::one();
    if c >= one || d <= zero {
        return Err(AgingError::DegenerateParams);
    }
    if c < zero {
        return Err(AgingError::OutOfRange("c"));
    }
    if u <= zero || u > one {
        return Err(AgingError::OutOfRange("u"));
    }
    if d > one {
        return Err(AgingError::OutOfRange("d"));
    }
    if p < one {
        return Err(AgingError::OutOfRange("p"));
    }
    Ok(one + (c * p + one) * u / (d * p * (one - c)))
}

/// Open space needed when an aging command is issued:
/// `ceil(c S / (p (k - 1)) + 1.5 p)`.
pub fn required_free_space<F: Float + ToPrimitive>(c: F, s_total: u64, p: u64, k: u64) -> u64 {
    assert!(k >= 2, "bundle must carry at least one payload slot");
    let cf = |x: u64| F::from(x).expect("integer fits in float");
    let three_halves = cf(3) / cf(2);
    let need = c * cf(s_total) / (cf(p) * cf(k - 1)) + three_halves * cf(p);
    need.ceil().to_u64().unwrap_or(0)
}

/// The tradeoff parameters of an infinite run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TradeoffParams<F> {
    /// Fraction of total storage that survives an aging event.
    pub c: F,
    /// Bound on the fraction of ticks lost to aging.
    pub d: F,
    /// Fraction of arriving edges that are unique.
    pub u: F,
    pub k: usize,
    pub p: usize,
    /// Per-processor capacity.
    pub s: usize,
}

impl<F: Float + ToPrimitive> TradeoffParams<F> {
    pub fn total_capacity(&self) -> usize {
        self.s * self.p
    }

    pub fn k_min(&self) -> Result<F, AgingError> {
        min_bandwidth_expansion(self.c, self.d, self.u, F::from(self.p).expect("fits"))
    }

    /// Smallest integral bundle size meeting [`k_min`](Self::k_min), at least 2.
    pub fn k_required(&self) -> Result<usize, AgingError> {
        let k = self.k_min()?.ceil().to_usize().ok_or(AgingError::OutOfRange("k"))?;
        Ok(k.max(2))
    }

    pub fn is_sufficient(&self) -> Result<bool, AgingError> {
        Ok(self.k >= self.k_required()?)
    }

    pub fn required_free_space(&self) -> u64 {
        required_free_space(self.c, self.total_capacity() as u64, self.p as u64, self.k as u64)
    }
}

/// Uniform sample of everything ever inserted (Vitter's algorithm R).
#[derive(Clone, Debug)]
pub struct Reservoir<T> {
    capacity: usize,
    samples: Vec<T>,
    seen: u64,
    rng: ChaCha8Rng,
}

impl<T: Clone> Reservoir<T> {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Reservoir {
            capacity,
            samples: Vec::with_capacity(capacity),
            seen: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn insert(&mut self, item: T) {
        self.seen += 1;
        if self.samples.len() < self.capacity {
            self.samples.push(item);
        } else if self.capacity > 0 {
            let j = self.rng.gen_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.samples[j as usize] = item;
            }
        }
    }

    pub fn clear(&mut self) {
        self.samples.clear();
        self.seen = 0;
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// Automatic aging configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AutoAgePolicy {
    /// Target surviving fraction of stored edges.
    pub c: f64,
    /// Safety multiplier on the required free space.
    pub margin: f64,
}

impl AutoAgePolicy {
    pub fn new(c: f64) -> Self {
        AutoAgePolicy { c, margin: DEFAULT_MARGIN }
    }

    /// Free-space level at or below which a search starts. The extra
    /// term covers edges arriving while the search circulates.
    pub fn trigger_level(&self, s_total: u64, p: u64, k: u64, tick: u64) -> u64 {
        let base = required_free_space(self.c, s_total, p, k) as f64 * self.margin;
        let circuits = 64 - (tick + 2).leading_zeros() as u64 + 1;
        base.ceil() as u64 + circuits * (p + 1)
    }

    /// Survivor count the search should aim for so that storage lands near
    /// `c * s_total` once aging ends. Edges keep arriving while the head
    /// tests its store and the loaders refill the ring, at most one per tick,
    /// so that many are subtracted up front.
    pub fn survivor_goal(&self, s_total: u64, p: u64, k: u64) -> f64 {
        let goal = self.c * s_total as f64;
        let k1 = (k.max(2) - 1) as f64;
        let lead = (goal / k1).ceil() + ((s_total / p.max(1)) as f64 / k1).ceil() + p as f64;
        (goal - lead).max(0.0)
    }
}

/// Result of feeding a returned probe to the search.
#[derive(Clone, Debug, PartialEq)]
pub enum SearchStep {
    Probe(SearchProbe),
    Done(Timestamp),
    Failed(AgingError),
}

/// Binary search over timestamps, one ring circuit per step.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSearch {
    pub qid: QueryId,
    pub c: f64,
    lo: u64,
    hi: u64,
    target: f64,
    goal: Option<f64>,
    circuits_left: u32,
    best: Option<(u64, f64)>,
}

impl ThresholdSearch {
    pub fn new(qid: QueryId, c: f64) -> (Self, SearchProbe) {
        let s = ThresholdSearch { qid, c, lo: 0, hi: 0, target: 0.0, goal: None, circuits_left: 0, best: None };
        (s, SearchProbe::gather(qid))
    }

    /// Search for an absolute survivor count instead of a fraction of what is stored.
    pub fn toward(qid: QueryId, survivors: f64) -> (Self, SearchProbe) {
        let (mut s, probe) = Self::new(qid, 0.0);
        s.goal = Some(survivors);
        (s, probe)
    }

    fn probe(&self, phase: u32) -> SearchProbe {
        let mid = self.lo + (self.hi - self.lo) / 2;
        SearchProbe { phase, candidate: Timestamp(mid), ..SearchProbe::gather(self.qid) }
    }

    pub fn on_return(&mut self, p: &SearchProbe) -> SearchStep {
        if p.phase == 0 {
            if p.stored == 0 || p.min_t > p.max_t {
                return SearchStep::Failed(AgingError::EmptySystem);
            }
            if p.min_t == p.max_t {
                return SearchStep::Done(Timestamp(p.min_t));
            }
            self.lo = p.min_t;
            self.hi = p.max_t;
            self.target = self.goal.unwrap_or(self.c * p.stored as f64);
            let range = self.hi - self.lo + 1;
            self.circuits_left = 64 - (range - 1).leading_zeros();
            return SearchStep::Probe(self.probe(1));
        }
        let t = p.candidate.0;
        let err = (p.estimate - self.target).abs();
        if self.best.is_none_or(|(_, e)| err < e) {
            self.best = Some((t, err));
        }
        if p.estimate > self.target {
            self.lo = t + 1;
        } else {
            self.hi = t;
        }
        self.circuits_left = self.circuits_left.saturating_sub(1);
        if self.circuits_left == 0 || self.lo >= self.hi {
            let pick = self.best.map(|(t, _)| t).unwrap_or(self.lo);
            return SearchStep::Done(Timestamp(pick));
        }
        SearchStep::Probe(self.probe(p.phase + 1))
    }
}
