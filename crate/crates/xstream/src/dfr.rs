//! Multi-pass semi-streaming reference for connected components, plus an
//! unlimited-capacity static oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::model::{BlockId, EdgeKey, LabeledEdge, VertexId};
use crate::union_find::{LocalComponents, NamingFn};

/// The two intermediate streams exchanged between passes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PassStreams {
    /// Contracted-graph edges.
    pub a: Vec<LabeledEdge>,
    /// `(buried block, supernode)` pairs.
    pub b: Vec<(BlockId, BlockId)>,
}

/// Vertex to component label.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub labels: BTreeMap<VertexId, BlockId>,
}

impl ComponentLabeling {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, v: VertexId) -> Option<BlockId> {
        self.labels.get(&v).copied()
    }

    /// Name-free view: the set of vertex classes.
    pub fn partition(&self) -> BTreeSet<BTreeSet<VertexId>> {
        let mut groups: BTreeMap<BlockId, BTreeSet<VertexId>> = BTreeMap::new();
        for (&v, &l) in &self.labels {
            groups.entry(l).or_default().insert(v);
        }
        groups.into_values().collect()
    }

    pub fn same_partition(&self, other: &ComponentLabeling) -> bool {
        self.partition() == other.partition()
    }

    /// Vertex counts of every class, largest first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.partition().iter().map(BTreeSet::len).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }
}

fn absorb(lc: &mut LocalComponents, e: &LabeledEdge) -> Option<LabeledEdge> {
    let lu = lc.find(e.lu);
    let lv = lc.find(e.lv);
    if lu == lv {
        return None;
    }
    if lc.has_capacity() {
        lc.union(lu, lv).expect("capacity checked and labels differ");
        None
    } else {
        Some(LabeledEdge { lu, lv, ..*e })
    }
}

/// One pass: union-find on a prefix of `a` until `s` unions are used, then
/// relabel the rest, dropping edges that fall inside a supernode.
pub fn dfr_pass(s: usize, naming: NamingFn, input: &PassStreams) -> PassStreams {
    let mut lc = LocalComponents::new(s, naming);
    let a = input.a.iter().filter_map(|e| absorb(&mut lc, e)).collect();
    let mut b: Vec<(BlockId, BlockId)> =
        input.b.iter().map(|&(x, y)| (x, lc.find(y))).collect();
    b.extend(lc.pairs());
    PassStreams { a, b }
}

/// Every intermediate stream pair; index 0 is the input, the last has an
/// empty A stream.
pub fn dfr_passes(s: usize, naming: NamingFn, a0: &[LabeledEdge]) -> Vec<PassStreams> {
    assert!(s >= 1, "capacity must allow at least one union");
    let mut passes = vec![PassStreams { a: a0.to_vec(), b: Vec::new() }];
    while !passes.last().map(|p| p.a.is_empty()).unwrap_or(true) {
        let next = dfr_pass(s, naming, passes.last().expect("non-empty"));
        passes.push(next);
    }
    passes
}

/// Run passes to completion and flatten the final B stream into labels.
pub fn dfr_run(s: usize, naming: NamingFn, a0: &[LabeledEdge]) -> ComponentLabeling {
    let passes = dfr_passes(s, naming, a0);
    let last = passes.last().expect("at least the input");
    let star: HashMap<BlockId, BlockId> = last.b.iter().copied().collect();
    let mut labels = BTreeMap::new();
    for e in a0 {
        for v in [e.u, e.v] {
            labels.entry(v).or_insert_with(|| chase(&star, v.into()));
        }
    }
    ComponentLabeling { labels }
}

fn chase(star: &HashMap<BlockId, BlockId>, mut b: BlockId) -> BlockId {
    let mut hops = 0usize;
    while let Some(&n) = star.get(&b) {
        if n == b || hops > star.len() {
            break;
        }
        b = n;
        hops += 1;
    }
    b
}

/// Unlimited union-find; each vertex is labelled by its component's minimum id.
pub fn static_cc<I>(edges: I) -> ComponentLabeling
where
    I: IntoIterator<Item = EdgeKey>,
{
    let mut lc = LocalComponents::new(usize::MAX, NamingFn::MIN);
    let mut seen = BTreeSet::new();
    for k in edges {
        seen.insert(k.lo());
        seen.insert(k.hi());
        let (a, b) = (lc.find(k.lo().into()), lc.find(k.hi().into()));
        if a != b {
            lc.union(a, b).expect("unbounded capacity");
        }
    }
    let labels = seen.into_iter().map(|v| (v, lc.label(v.into()))).collect();
    ComponentLabeling { labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Timestamp;

    fn e(u: u64, v: u64) -> LabeledEdge {
        LabeledEdge::fresh(VertexId(u), VertexId(v), Timestamp(0))
    }

    #[test]
    fn empty_input_gives_empty_streams() {
        let out = dfr_pass(3, NamingFn::MIN, &PassStreams::default());
        assert!(out.a.is_empty() && out.b.is_empty());
        assert!(dfr_run(3, NamingFn::MIN, &[]).is_empty());
        assert!(static_cc(Vec::new()).is_empty());
    }

    #[test]
    fn single_edge_shares_label() {
        let l = dfr_run(1, NamingFn::MIN, &[e(4, 9)]);
        assert_eq!(l.label(VertexId(4)), Some(BlockId(4)));
        assert_eq!(l.label(VertexId(9)), Some(BlockId(4)));
    }

    #[test]
    fn disjoint_edges_get_distinct_labels() {
        let l = dfr_run(1, NamingFn::MIN, &[e(1, 2), e(3, 4)]);
        assert_ne!(l.label(VertexId(1)), l.label(VertexId(3)));
        assert_eq!(l.partition().len(), 2);
    }

    #[test]
    fn triangle_and_path_are_single_components() {
        let tri = static_cc([(1, 2), (2, 3), (3, 1)].map(|(a, b)| EdgeKey::new(VertexId(a), VertexId(b))));
        assert_eq!(tri.partition().len(), 1);
        let path = static_cc((0..99).map(|i| EdgeKey::new(VertexId(i), VertexId(i + 1))));
        assert_eq!(path.partition().len(), 1);
        assert_eq!(path.len(), 100);
    }
}
