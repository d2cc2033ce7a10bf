//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use xstream::model::{EdgeKey, QueryId, StreamItem, VertexId};
use xstream::ring::{OutputResult, Transcript, TranscriptEvent};

/// Plain union-find with min-id labels.
#[derive(Default, Clone)]
pub struct Dsu {
    parent: HashMap<u64, u64>,
}

impl Dsu {
    pub fn find(&mut self, x: u64) -> u64 {
        let p = *self.parent.get(&x).unwrap_or(&x);
        if p == x {
            return x;
        }
        let r = self.find(p);
        self.parent.insert(x, r);
        r
    }

    pub fn union(&mut self, a: u64, b: u64) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent.insert(hi, lo);
        }
    }
}

/// Active-graph reference: newest timestamp per key plus connectivity.
#[derive(Default, Clone)]
pub struct Oracle {
    pub active: HashMap<EdgeKey, u64>,
    dsu: Dsu,
}

impl Oracle {
    pub fn add(&mut self, u: u64, v: u64, t: u64) {
        let k = EdgeKey::new(VertexId(u), VertexId(v));
        let e = self.active.entry(k).or_insert(t);
        *e = (*e).max(t);
        self.dsu.union(u, v);
    }

    /// Keep edges whose newest timestamp is at least `threshold`.
    pub fn age(&mut self, threshold: u64) {
        self.active.retain(|_, t| *t >= threshold);
        self.rebuild();
    }

    pub fn retain(&mut self, mut keep: impl FnMut(EdgeKey, u64) -> bool) {
        self.active.retain(|k, t| keep(*k, *t));
        self.rebuild();
    }

    fn rebuild(&mut self) {
        self.dsu = Dsu::default();
        for k in self.active.keys() {
            self.dsu.union(k.lo().0, k.hi().0);
        }
    }

    pub fn connected(&mut self, u: u64, v: u64) -> bool {
        u == v || self.dsu.find(u) == self.dsu.find(v)
    }

    pub fn keys(&self) -> BTreeSet<EdgeKey> {
        self.active.keys().copied().collect()
    }

    /// Vertex partition of the active graph.
    pub fn partition(&self) -> BTreeSet<BTreeSet<u64>> {
        let mut d = Dsu::default();
        let mut vs = BTreeSet::new();
        for k in self.active.keys() {
            if !k.is_loop() {
                d.union(k.lo().0, k.hi().0);
                vs.insert(k.lo().0);
                vs.insert(k.hi().0);
            }
        }
        let mut groups: HashMap<u64, BTreeSet<u64>> = HashMap::new();
        for v in vs {
            groups.entry(d.find(v)).or_default().insert(v);
        }
        groups.into_values().collect()
    }
}

/// A transcript split back into what went in and what came out.
#[derive(Default, Debug)]
pub struct Replay {
    /// (tick, rendered item) for every injected item.
    pub inputs: Vec<(u64, String)>,
    pub outputs: Vec<(u64, QueryId, OutputResult)>,
}

impl Replay {
    pub fn new(t: &Transcript) -> Self {
        let mut r = Replay::default();
        for e in &t.events {
            match e {
                TranscriptEvent::In { tick, item } if item != "NOP" => r.inputs.push((*tick, item.clone())),
                TranscriptEvent::In { .. } => {}
                TranscriptEvent::Out(o) => r.outputs.push((o.tick, o.qid, o.result.clone())),
            }
        }
        r
    }

    pub fn input_at(&self, tick: u64) -> Option<&str> {
        self.inputs.iter().find(|(t, _)| *t == tick).map(|(_, s)| s.as_str())
    }
}

/// Parse an injected edge line.
pub fn parse_edge(item: &str) -> Option<(u64, u64)> {
    let mut it = item.split_whitespace();
    if it.next()? != "E" {
        return None;
    }
    Some((it.next()?.parse().ok()?, it.next()?.parse().ok()?))
}

/// Number of edge records in a stream.
pub fn edge_count(items: &[StreamItem]) -> usize {
    items.iter().filter(|i| i.is_edge()).count()
}

/// Check every normal-mode connectivity answer against the oracle state at
/// the query's arrival tick; returns (checked, mismatches).
pub fn check_connectivity(t: &Transcript) -> (usize, usize) {
    let replay = Replay::new(t);
    let mut answers: HashMap<QueryId, OutputResult> = HashMap::new();
    for (_, qid, res) in &replay.outputs {
        answers.insert(*qid, res.clone());
    }
    let mut oracle = Oracle::default();
    let (mut checked, mut bad) = (0, 0);
    for (tick, item) in &replay.inputs {
        let mut it = item.split_whitespace();
        match it.next() {
            Some("E") => {
                let (u, v) = parse_edge(item).unwrap();
                oracle.add(u, v, *tick);
            }
            Some("AGE") => {
                if let Some(OutputResult::Rejected(_)) = answers.get(&QueryId(*tick)) {
                    continue;
                }
                let th: u64 = it.next().unwrap().parse().unwrap();
                oracle.age(th);
            }
            Some("Q") => {
                let u: u64 = it.next().unwrap().parse().unwrap();
                let v: u64 = it.next().unwrap().parse().unwrap();
                match answers.get(&QueryId(*tick)) {
                    Some(OutputResult::Bool(b)) => {
                        checked += 1;
                        if *b != oracle.connected(u, v) {
                            bad += 1;
                        }
                    }
                    Some(OutputResult::Busy) => {}
                    other => panic!("query at {tick} got {other:?}"),
                }
            }
            _ => {}
        }
    }
    (checked, bad)
}
