//! Synthetic stream generators.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{EdgeKey, StreamItem, VertexId};

/// Default number of recent edges a duplicate is drawn from.
pub const DEFAULT_WINDOW: usize = 4096;

/// Default R-MAT quadrant probabilities `(a, b, c, d)`.
pub const RMAT_DEFAULT: (f64, f64, f64, f64) = (0.45, 0.15, 0.15, 0.25);

fn key(u: u64, v: u64) -> EdgeKey {
    EdgeKey::new(VertexId(u), VertexId(v))
}

/// Uniform random graph stream whose unique fraction is about `u`.
///
/// With probability `u` the next edge is a new pair; otherwise it repeats
/// one of the last `window` edges.
pub fn uniform(n: usize, vertices: u64, u: f64, window: usize, seed: u64) -> Vec<(u64, u64)> {
    assert!(u > 0.0 && u <= 1.0, "unique fraction must lie in (0, 1]");
    assert!(vertices >= 2, "need two vertices for a non-loop edge");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(n);
    let max_pairs = vertices.saturating_mul(vertices - 1) / 2;
    while out.len() < n {
        let fresh = out.is_empty() || rng.gen_bool(u);
        if fresh && (seen.len() as u64) < max_pairs {
            loop {
                let a = rng.gen_range(0..vertices);
                let b = rng.gen_range(0..vertices);
                if a != b && seen.insert(key(a, b)) {
                    out.push((a, b));
                    break;
                }
            }
        } else {
            let lo = out.len().saturating_sub(window.max(1));
            let i = rng.gen_range(lo..out.len());
            let (a, b) = out[i];
            out.push(if rng.gen_bool(0.5) { (b, a) } else { (a, b) });
        }
    }
    out
}

/// Each new uniform edge repeated `m` times back to back.
pub fn repeat_block(n: usize, vertices: u64, m: usize, seed: u64) -> Vec<(u64, u64)> {
    assert!(m >= 1);
    let fresh = uniform(n.div_ceil(m), vertices, 1.0, 1, seed);
    fresh.into_iter().flat_map(|e| std::iter::repeat_n(e, m)).take(n).collect()
}

/// Recursive-quadrant power-law stream over `2^scale` vertices; self-loops are redrawn.
pub fn rmat(n: usize, scale: u32, probs: (f64, f64, f64, f64), seed: u64) -> Vec<(u64, u64)> {
    assert!((1..63).contains(&scale));
    let (a, b, c, _) = probs;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (mut x, mut y) = (0u64, 0u64);
        for _ in 0..scale {
            let r: f64 = rng.gen();
            let (dx, dy) = if r < a {
                (0, 0)
            } else if r < a + b {
                (0, 1)
            } else if r < a + b + c {
                (1, 0)
            } else {
                (1, 1)
            };
            x = (x << 1) | dx;
            y = (y << 1) | dy;
        }
        if x != y {
            out.push((x, y));
        }
    }
    out
}

/// Fraction of edges whose key has not appeared earlier in the stream.
pub fn unique_fraction(edges: &[(u64, u64)]) -> f64 {
    if edges.is_empty() {
        return 1.0;
    }
    let distinct: HashSet<_> = edges.iter().map(|&(a, b)| key(a, b)).collect();
    distinct.len() as f64 / edges.len() as f64
}

pub fn as_items(edges: &[(u64, u64)]) -> Vec<StreamItem> {
    edges.iter().map(|&(u, v)| StreamItem::edge(u, v)).collect()
}

/// Insert a connectivity query after every `every` edges. Half the queries
/// pair the endpoints of two recent edges, the rest pick random vertices.
pub fn with_queries(edges: &[(u64, u64)], every: usize, vertices: u64, seed: u64) -> Vec<StreamItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51_7C_C1_B7);
    let mut out = Vec::with_capacity(edges.len() + edges.len() / every.max(1));
    for (i, &(u, v)) in edges.iter().enumerate() {
        out.push(StreamItem::edge(u, v));
        if every > 0 && (i + 1) % every == 0 {
            let q = if rng.gen_bool(0.5) {
                let j = rng.gen_range(i.saturating_sub(64)..=i);
                let pick = |r: &mut ChaCha8Rng, e: (u64, u64)| if r.gen_bool(0.5) { e.0 } else { e.1 };
                (pick(&mut rng, edges[j]), pick(&mut rng, (u, v)))
            } else {
                (rng.gen_range(0..vertices), rng.gen_range(0..vertices))
            };
            out.push(StreamItem::conn(q.0, q.1));
        }
    }
    out
}

/// A copy of `edges` shuffled and with a random subset repeated.
pub fn shuffle_with_duplicates(edges: &[(u64, u64)], dup_fraction: f64, seed: u64) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(u64, u64)> = edges.to_vec();
    for &(a, b) in edges {
        if rng.gen_bool(dup_fraction) {
            out.push((b, a));
        }
    }
    out.shuffle(&mut rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeat_block_unique_fraction() {
        let s = repeat_block(10_000, 1 << 20, 100, 3);
        assert_eq!(s.len(), 10_000);
        assert!((unique_fraction(&s) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn uniform_has_no_loops() {
        assert!(uniform(2000, 50, 0.7, DEFAULT_WINDOW, 1).iter().all(|&(a, b)| a != b));
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(uniform(500, 100, 0.5, 64, 9), uniform(500, 100, 0.5, 64, 9));
        assert_eq!(rmat(500, 10, RMAT_DEFAULT, 9), rmat(500, 10, RMAT_DEFAULT, 9));
    }
}
