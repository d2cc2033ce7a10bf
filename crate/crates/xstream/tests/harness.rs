//! Generators and experiment harnesses.

use std::collections::HashMap;

use xstream::experiments::{aging_cell, auto_age_run, throughput, CellParams, Lead};
use xstream::gen;
use xstream::ring::RingConfig;

#[test]
fn uniform_hits_its_unique_fraction() {
    let edges = gen::uniform(100_000, 1 << 20, 0.67, gen::DEFAULT_WINDOW, 5);
    let u = gen::unique_fraction(&edges);
    assert!((u - 0.67).abs() <= 0.02, "realized {u}");
}

fn degree_ratio(edges: &[(u64, u64)], vertices: u64) -> f64 {
    let mut deg: HashMap<u64, u64> = HashMap::new();
    for &(a, b) in edges {
        *deg.entry(a).or_default() += 1;
        *deg.entry(b).or_default() += 1;
    }
    let mean = 2.0 * edges.len() as f64 / vertices as f64;
    *deg.values().max().unwrap() as f64 / mean
}

#[test]
fn rmat_degrees_are_heavy_tailed() {
    // vertex 0 draws each endpoint with probability 0.6^12, so its degree is
    // about 4096 * 0.6^12 = 8.9 times the mean
    let expected = 4096.0 * 0.6f64.powi(12);
    let ratio = degree_ratio(&gen::rmat(200_000, 12, gen::RMAT_DEFAULT, 2), 4096);
    assert!((ratio - expected).abs() < 0.1 * expected, "ratio {ratio}, expected {expected}");
    let flat = degree_ratio(&gen::uniform(200_000, 4096, 1.0, 1, 2), 4096);
    assert!(ratio > 4.0 * flat, "rmat {ratio} vs uniform {flat}");
}

#[test]
fn sufficient_bundle_survives_a_single_aging() {
    let mut p = CellParams::new(0.5, 0.5, 1.0, 10, 2000);
    p.cycles = 1;
    p.validate = true;
    let r = aging_cell(p);
    assert_eq!(r.k, 4);
    assert!(r.failed_at.is_none());
    assert_eq!(r.events.len(), 1);
    assert_eq!((r.events[0].dropped, r.events[0].extra), (0, 0));
    assert_eq!(r.violations, 0);
}

#[test]
fn narrow_bundle_with_late_aging_fails() {
    let mut p = CellParams::new(0.5, 0.5, 1.0, 10, 2000);
    p.k = Some(2);
    p.lead = Lead::Late(20);
    p.cycles = 1;
    let r = aging_cell(p);
    assert!(r.failed_at.is_some());
}

#[test]
fn auto_aging_holds_storage_near_target() {
    let r = auto_age_run(RingConfig::new(5, 1000, 6), 0.5, 60_000, 3);
    assert!(r.failed_at.is_none());
    assert!(r.after_aging.len() >= 5, "{} events", r.after_aging.len());
    assert!(r.worst_deviation() <= 0.10, "{}", r.worst_deviation());
    assert!(r.series.iter().all(|&(_, s)| s <= r.s_total));
}

#[test]
fn throughput_reports_both_engines() {
    let edges = gen::uniform(5_000, 20_000, 1.0, 1, 8);
    for pipelined in [false, true] {
        let r = throughput(RingConfig::new(4, 2000, 3), &edges, pipelined).unwrap();
        assert_eq!(r.edges, 5_000);
        assert!(r.ticks >= 5_000);
        assert!(r.edges_per_sec() > 0.0);
    }
}
