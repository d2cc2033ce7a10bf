//! Property tests for keys, local components, the stream format, the
//! reservoir, the bandwidth bound and the ring's storage invariants.

mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use xstream::aging::{min_bandwidth_expansion, AgingPredicate, Reservoir};
use xstream::model::{BlockId, EdgeKey, StreamItem, Timestamp, VertexId};
use xstream::ring::{Ring, RingConfig};
use xstream::stream::{parse_str, render};
use xstream::union_find::{LocalComponents, NamingFn};

use common::Dsu;

fn item() -> impl Strategy<Value = StreamItem> {
    let v = 0u64..1_000_000;
    prop_oneof![
        Just(StreamItem::Empty),
        (v.clone(), v.clone()).prop_map(|(a, b)| StreamItem::edge(a, b)),
        (v.clone(), v).prop_map(|(a, b)| StreamItem::conn(a, b)),
        Just(StreamItem::EdgeCount),
        (0u64..5000).prop_map(StreamItem::SmallComponents),
        Just(StreamItem::SpanningTree),
        Just(StreamItem::MaxComponent),
        Just(StreamItem::Dump),
        any::<u64>().prop_map(|t| StreamItem::Age(AgingPredicate::Threshold(Timestamp(t)))),
        (0.0f64..1.0).prop_map(StreamItem::AutoAge),
    ]
}

proptest! {
    #[test]
    fn key_is_orientation_free(a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (EdgeKey::new(VertexId(a), VertexId(b)), EdgeKey::new(VertexId(b), VertexId(a)));
        prop_assert_eq!(x, y);
        prop_assert!(x.lo() <= x.hi());
        prop_assert_eq!(x.is_loop(), a == b);
    }

    #[test]
    fn stream_round_trips(items in prop::collection::vec(item(), 0..60)) {
        let text = render(&items);
        prop_assert_eq!(parse_str(&text).unwrap(), items);
    }

    #[test]
    fn local_components_track_a_plain_dsu(
        ops in prop::collection::vec((0u64..40, 0u64..40), 1..120),
        cap in 1usize..60,
    ) {
        let mut lc = LocalComponents::new(cap, NamingFn::MIN);
        let mut dsu = Dsu::default();
        let mut members: HashMap<u64, Vec<u64>> = HashMap::new();
        for (a, b) in ops {
            let (la, lb) = (lc.find(BlockId(a)), lc.find(BlockId(b)));
            let same = la == lb;
            let res = lc.union(la, lb);
            if same {
                prop_assert!(res.is_err());
                continue;
            }
            match res {
                Ok(name) => {
                    dsu.union(a, b);
                    // min naming: the new name is the smallest vertex in the set
                    prop_assert_eq!(name, BlockId(dsu.find(a)));
                }
                Err(_) => prop_assert_eq!(lc.unions_used(), cap),
            }
            prop_assert!(lc.unions_used() <= lc.capacity());
            members.entry(a).or_default();
            members.entry(b).or_default();
        }
        let vs: Vec<u64> = members.keys().copied().collect();
        for &x in &vs {
            for &y in &vs {
                let together = lc.find(BlockId(x)) == lc.find(BlockId(y));
                prop_assert_eq!(together, dsu.find(x) == dsu.find(y));
            }
            if let Some(size) = lc.component_size(BlockId(x)) {
                let want = vs.iter().filter(|&&y| dsu.find(y) == dsu.find(x) && lc.is_consumed(BlockId(y))).count();
                prop_assert_eq!(size as usize, want);
            }
        }
        // every pair points at a label that names itself
        for (b, l) in lc.pairs() {
            prop_assert_ne!(b, l);
            prop_assert_eq!(lc.label(l), l);
        }
    }

    #[test]
    fn reservoir_keeps_a_subset_of_bounded_size(n in 0usize..3000, cap in 1usize..200, seed in any::<u64>()) {
        let mut r = Reservoir::new(cap, seed);
        for i in 0..n {
            r.insert(i);
        }
        prop_assert_eq!(r.samples().len(), n.min(cap));
        prop_assert_eq!(r.seen(), n as u64);
        let mut s = r.samples().to_vec();
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), n.min(cap));
        prop_assert!(s.iter().all(|&x| x < n));
    }

    #[test]
    fn k_min_moves_the_right_way(
        c in 0.01f64..0.95, d in 0.05f64..0.95, u in 0.05f64..1.0, p in 1u32..64, dc in 0.0f64..0.04, dd in 0.0f64..0.04,
    ) {
        let p = f64::from(p);
        let k = min_bandwidth_expansion(c, d, u, p).unwrap();
        prop_assert!(k > 1.0);
        prop_assert!(min_bandwidth_expansion(c + dc, d, u, p).unwrap() >= k);
        prop_assert!(min_bandwidth_expansion(c, d + dd, u, p).unwrap() <= k);
        prop_assert!(min_bandwidth_expansion(c, d, (u * 0.9).max(1e-3), p).unwrap() <= k);
    }
}

fn small_stream() -> impl Strategy<Value = (Vec<(u64, u64)>, Option<usize>)> {
    (prop::collection::vec((0u64..30, 0u64..30), 1..150), prop::option::of(0usize..150))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ring_stores_each_key_once_and_conserves_space(
        (edges, age_at) in small_stream(), p in 1usize..6, s in 30usize..60, k in 2usize..5,
    ) {
        // leave room for every distinct key twice over, so overflow is never the limit
        let distinct = edges.iter().map(|&(a, b)| EdgeKey::new(VertexId(a), VertexId(b))).collect::<std::collections::HashSet<_>>().len();
        let s = s.max((2 * distinct).div_ceil(p) + 2 * p + 8);
        let mut cfg = RingConfig::new(p, s, k);
        cfg.validate = true;
        cfg.metrics = true;
        let mut ring = Ring::new(cfg).unwrap();
        let mut items: Vec<StreamItem> = edges.iter().map(|&(a, b)| StreamItem::edge(a, b)).collect();
        if let Some(i) = age_at {
            let i = i.min(items.len());
            items.insert(i, StreamItem::Age(AgingPredicate::Threshold(Timestamp(i as u64 / 2))));
        }
        ring.run(items).unwrap();
        prop_assert!(ring.violations().is_empty(), "{:?}", &ring.violations()[..1]);
        let mut counts: HashMap<EdgeKey, usize> = HashMap::new();
        for e in ring.stored_edges() {
            *counts.entry(e.key).or_default() += 1;
        }
        prop_assert!(counts.values().all(|&n| n == 1));
        let total = cfg.total_capacity();
        for row in ring.metrics() {
            prop_assert!(row.stored_total <= total);
            prop_assert_eq!(row.free_space, total - row.stored_total);
            prop_assert_eq!(
                row.stored_total,
                row.tree_total + row.nontree_total + row.untested_total + row.unresolved_total
            );
        }
    }
}

#[test]
fn reservoir_inclusion_frequency_is_uniform() {
    const N: u64 = 100_000;
    const R: usize = 100;
    const SEEDS: u64 = 1000;
    let watched = [17u64, 50_000, N - 1];
    let mut hits = [0u64; 3];
    for seed in 0..SEEDS {
        let mut r = Reservoir::new(R, seed);
        for i in 0..N {
            r.insert(i);
        }
        for (h, w) in hits.iter_mut().zip(watched) {
            *h += u64::from(r.samples().contains(&w));
        }
    }
    let p = R as f64 / N as f64;
    let sigma = (p * (1.0 - p) / SEEDS as f64).sqrt();
    for (h, w) in hits.iter().zip(watched) {
        let freq = *h as f64 / SEEDS as f64;
        assert!((freq - p).abs() <= 3.0 * sigma, "item {w}: frequency {freq} vs {p} (3 sigma = {})", 3.0 * sigma);
    }
}
