//! Whole-ring behaviour: command gating, failure, faults and engine parity.

mod common;

use xstream::aging::AgingPredicate;
use xstream::gen;
use xstream::model::{QueryId, RejectReason, StreamItem, Timestamp};
use xstream::pipelined::run_stream_pipelined;
use xstream::ring::{run_stream, OutputResult, Ring, RingConfig, RingError};

fn results(t: &xstream::ring::Transcript, qid: u64) -> Vec<OutputResult> {
    t.results_for(QueryId(qid)).into_iter().map(|o| o.result.clone()).collect()
}

#[test]
fn small_stream_answers_and_audits_clean() {
    let mut cfg = RingConfig::new(3, 4, 3);
    cfg.validate = true;
    let mut ring = Ring::new(cfg).unwrap();
    let items = vec![
        StreamItem::edge(1, 2),
        StreamItem::edge(2, 3),
        StreamItem::edge(4, 5),
        StreamItem::conn(1, 3),
        StreamItem::conn(1, 4),
        StreamItem::EdgeCount,
        StreamItem::Dump,
    ];
    ring.run(items).unwrap();
    assert!(ring.violations().is_empty());
    let t = ring.transcript();
    assert_eq!(results(t, 3), [OutputResult::Bool(true)]);
    assert_eq!(results(t, 4), [OutputResult::Bool(false)]);
    assert_eq!(results(t, 5), [OutputResult::Count(3)]);
    assert_eq!(results(t, 6).last(), Some(&OutputResult::Done));
}

#[test]
fn commands_during_aging_are_gated() {
    let mut items: Vec<StreamItem> = (0..40).map(|i| StreamItem::edge(i, i + 1)).collect();
    items.push(StreamItem::Age(AgingPredicate::Threshold(Timestamp(20))));
    items.push(StreamItem::conn(0, 1));
    items.push(StreamItem::Age(AgingPredicate::Threshold(Timestamp(30))));
    items.push(StreamItem::Dump);
    let t = run_stream(RingConfig::new(4, 30, 3), items).unwrap();
    assert_eq!(results(&t, 41), [OutputResult::Busy]);
    assert_eq!(results(&t, 42), [OutputResult::Rejected(RejectReason::Busy)]);
    assert_eq!(results(&t, 43), [OutputResult::Rejected(RejectReason::Busy)]);
    assert!(results(&t, 40).contains(&OutputResult::Aged));
}

#[test]
fn concurrent_dumps_are_rejected() {
    let mut items: Vec<StreamItem> = (0..10).map(|i| StreamItem::edge(i, i + 100)).collect();
    items.push(StreamItem::Dump);
    items.push(StreamItem::SpanningTree);
    let t = run_stream(RingConfig::new(3, 20, 3), items).unwrap();
    assert_eq!(results(&t, 11), [OutputResult::Rejected(RejectReason::Concurrent)]);
    assert_eq!(results(&t, 10).last(), Some(&OutputResult::Done));
}

#[test]
fn auto_age_command_reports_threshold_then_ages() {
    let mut items: Vec<StreamItem> = (0..200).map(|i| StreamItem::edge(2 * i, 2 * i + 1)).collect();
    items.push(StreamItem::AutoAge(0.5));
    let mut cfg = RingConfig::new(4, 100, 4);
    cfg.validate = true;
    let mut ring = Ring::new(cfg).unwrap();
    ring.run(items).unwrap();
    assert!(ring.violations().is_empty());
    let out = results(ring.transcript(), 200);
    let th = out.iter().find_map(|r| match r {
        OutputResult::AutoAge(Some(t)) => Some(t.0),
        _ => None,
    });
    assert!(th.is_some(), "{out:?}");
    assert!(ring.transcript().outputs().any(|o| o.result == OutputResult::Aged));
    assert!(ring.stored_total() < 200);
}

#[test]
fn overflow_reports_the_failing_tick() {
    let items = gen::as_items(&gen::uniform(200, 1000, 1.0, 1, 4));
    let mut ring = Ring::new(RingConfig::new(2, 10, 3)).unwrap();
    match ring.run(items) {
        Err(RingError::SystemFailed { tick }) => {
            assert_eq!(ring.failed_at(), Some(tick));
            assert!(tick >= 20, "cannot fail before {} edges arrive", 20);
        }
        other => panic!("expected failure, got {other:?}"),
    }
}

#[test]
fn planted_fault_is_caught() {
    let mut cfg = RingConfig::new(4, 20, 3);
    cfg.validate = true;
    let mut ring = Ring::new(cfg).unwrap();
    ring.run(gen::as_items(&gen::uniform(40, 30, 1.0, 1, 9))).unwrap();
    assert!(ring.audit_invariants().is_empty());
    assert!(ring.inject_fault_tree_downstream());
    assert!(!ring.audit_invariants().is_empty());
}

#[test]
fn engines_agree_across_aging_and_queries() {
    let edges = gen::uniform(20_000, 5_000, 0.67, gen::DEFAULT_WINDOW, 3);
    let mut items = gen::with_queries(&edges, 10, 5_000, 3);
    items.insert(8000, StreamItem::Age(AgingPredicate::Threshold(Timestamp(4000))));
    items.push(StreamItem::Dump);
    let cfg = RingConfig::new(5, 3000, 3);
    let lock = run_stream(cfg, items.clone()).unwrap();
    let (pipe, res) = run_stream_pipelined(cfg, items);
    res.unwrap();
    assert_eq!(lock, pipe);
    let (checked, bad) = common::check_connectivity(&lock);
    assert!(checked > 1000);
    assert_eq!(bad, 0);
}
