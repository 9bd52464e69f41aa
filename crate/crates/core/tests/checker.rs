mod common;

use common::{algo, cells, grid, owned, same_up_to_symmetry, ASYNC_FAMILY, FSYNC_FAMILY};
use myogrid::checker::{check, check_range, check_with, refute_candidate, CheckOptions, CheckReport, Witness};
use myogrid::engine::{Engine, SynchronyModel};
use myogrid::{AlgorithmSpec, Verdict};

/// Every step of the witness is a successor of the previous one, and a cycle
/// closes back onto its first state up to the symmetries the checker merges.
fn assert_replays(a: &AlgorithmSpec, r: &CheckReport) {
    let Witness { trace, cycle_start } = r.witness.as_ref().expect("violations carry a witness");
    let e = Engine::new(a, r.grid).unwrap();
    assert_eq!(trace.steps[0].state.key(), e.initial_state().key());
    for w in trace.steps.windows(2) {
        let next = w[1].state.key();
        assert!(
            e.successors(r.model, &w[0].state).iter().any(|t| t.state.key() == next),
            "t={} is not a successor",
            w[1].t
        );
    }
    if let Some(k) = cycle_start {
        let group = e.symmetry_group();
        let target = trace.steps[*k].state.canonical_key(&r.grid, &group);
        let last = &trace.final_state();
        assert!(e
            .successors(r.model, last)
            .iter()
            .any(|t| t.state.canonical_key(&r.grid, &group) == target));
    }
}

fn without(a: &AlgorithmSpec, label: &str) -> AlgorithmSpec {
    let mut b = a.clone();
    b.rules.retain(|r| r.label != label);
    b
}

#[test]
fn f22t2_on_2x3_is_verified() {
    let r = check(&algo("F22T2"), grid(2, 3), SynchronyModel::Fsync);
    assert_eq!(r.verdict, Verdict::Verified);
    let t: Vec<_> = r.terminal.iter().map(cells).collect();
    assert_eq!(t, vec![owned(&[(1, 1, "GW")])]);
    assert!(r.witness.is_none());
}

#[test]
fn a23f3_on_3x3_is_verified() {
    let r = check(&algo("A23F3"), grid(3, 3), SynchronyModel::Async);
    assert_eq!(r.verdict, Verdict::Verified);
    assert_eq!(r.terminal.len(), 1);
    let want = owned(&[(1, 1, "G"), (2, 0, "W"), (2, 1, "B")]);
    assert!(same_up_to_symmetry(3, 3, &cells(&r.terminal[0]), &want));
}

#[test]
fn f22t2_without_turn_rule_fails_with_replayable_witness() {
    let a = without(&algo("F22T2"), "R3");
    let r = check(&a, grid(2, 4), SynchronyModel::Fsync);
    assert!(matches!(r.verdict, Verdict::Nontermination | Verdict::PartialCoverage), "{}", r.verdict);
    assert_replays(&a, &r);
    if r.verdict == Verdict::PartialCoverage {
        assert!(!r.unvisited.is_empty());
    }
}

#[test]
fn zero_rules_leave_nodes_unvisited() {
    let mut a = algo("F13T2");
    a.rules.clear();
    let r = refute_candidate(&a, grid(4, 4), SynchronyModel::Ssync);
    assert_eq!(r.report.verdict, Verdict::PartialCoverage);
    assert_eq!(r.report.stats.canonical, 1);
    assert_eq!(r.report.unvisited.len(), 14);
}

#[test]
fn check_range_f13t2() {
    let rs = check_range(&algo("F13T2"), 2..=4, 3..=5, SynchronyModel::Fsync, 2);
    assert_eq!(rs.len(), 9);
    assert!(rs.iter().all(|r| r.verdict == Verdict::Verified));
    let dims: Vec<_> = rs.iter().map(|r| (r.grid.rows(), r.grid.cols())).collect();
    let mut sorted = dims.clone();
    sorted.sort();
    assert_eq!(dims, sorted);
}

#[test]
#[allow(clippy::reversed_empty_ranges)]
fn check_range_empty() {
    assert!(check_range(&algo("F13T2"), 4..=3, 3..=5, SynchronyModel::Fsync, 1).is_empty());
}

#[test]
fn check_range_skips_grids_below_minimum() {
    let rs = check_range(&algo("A13F6"), 2..=4, 3..=4, SynchronyModel::Async, 0);
    assert_eq!(rs.len(), 4);
    assert!(rs.iter().all(|r| r.verdict == Verdict::Verified));
}

#[test]
fn grid_below_minimum_is_an_error_report() {
    let r = check(&algo("A13F6"), grid(2, 5), SynchronyModel::Async);
    assert_eq!(r.verdict, Verdict::Error);
    assert!(r.message.is_some());
}

#[test]
fn exhausted_budget_is_an_error_not_a_verdict() {
    let opts = CheckOptions {
        state_budget: 5,
        ..CheckOptions::default()
    };
    let r = check_with(&algo("A22T3"), grid(3, 4), SynchronyModel::Async, &opts);
    assert_eq!(r.verdict, Verdict::Error);
    assert!(r.stats.canonical >= 5);
}

#[test]
fn symmetry_reduction_preserves_verdicts_and_terminals() {
    let plain = CheckOptions {
        symmetry: false,
        ..CheckOptions::default()
    };
    let names = FSYNC_FAMILY.iter().chain(ASYNC_FAMILY.iter());
    for name in names {
        let a = algo(name);
        let model = if name.starts_with('A') { SynchronyModel::Async } else { SynchronyModel::Fsync };
        for (m, n) in [(3, 3), (3, 4), (2, 3), (2, 4)] {
            if m < a.min_m || n < a.min_n {
                continue;
            }
            let g = grid(m, n);
            let with = check(&a, g, model);
            let bare = check_with(&a, g, model, &plain);
            assert_eq!(with.verdict, bare.verdict, "{name} {m}x{n}");
            assert!(with.stats.canonical <= bare.stats.canonical);
            // Each class representative covers at least one unreduced terminal and vice versa.
            let reduced: Vec<_> = with.terminal.iter().map(cells).collect();
            let full: Vec<_> = bare.terminal.iter().map(cells).collect();
            for t in &full {
                assert!(reduced.iter().any(|r| same_up_to_symmetry(m, n, r, t)), "{name} {m}x{n}");
            }
            for r in &reduced {
                assert!(full.iter().any(|t| same_up_to_symmetry(m, n, r, t)), "{name} {m}x{n}");
            }
        }
    }
}

#[test]
fn two_robot_catalog_entry_fails_under_ssync() {
    // F13T2 is written for FSYNC; two robots with a visibility of one
    // cannot explore under SSYNC.
    let a = algo("F13T2");
    let rf = refute_candidate(&a, grid(6, 6), SynchronyModel::Ssync);
    assert_ne!(rf.report.verdict, Verdict::Verified);
    assert!(rf.case.is_some());
    assert_replays(&a, &rf.report);
}

#[test]
fn report_json_shape() {
    let r = check(&algo("F22T2"), grid(3, 3), SynchronyModel::Fsync);
    let v = serde_json::to_value(r.to_json()).unwrap();
    assert_eq!(v["verdict"], "VERIFIED");
    assert_eq!(v["grid"], serde_json::json!([3, 3]));
    assert_eq!(v["model"], "fsync");
    assert!(v["stats"]["states"].as_u64().unwrap() >= v["stats"]["canonical"].as_u64().unwrap());
    assert!(v["witness"].is_null());
    assert_eq!(v["terminal"].as_array().unwrap().len(), 1);

    let broken = without(&algo("F22T2"), "R3");
    let r = check(&broken, grid(2, 4), SynchronyModel::Fsync);
    let v = serde_json::to_value(r.to_json()).unwrap();
    assert!(v["witness"]["steps"].as_array().is_some_and(|s| !s.is_empty()));
}

#[test]
fn checks_are_deterministic() {
    let a = without(&algo("A22T3"), "R6");
    let once = || {
        let mut j = check(&a, grid(3, 4), SynchronyModel::Async).to_json();
        j.stats.ms = 0;
        serde_json::to_string(&j).unwrap()
    };
    assert_eq!(once(), once());
}

#[test]
fn cycle_witness_replays_through_symmetric_images() {
    // Square grids give the checker rotations to merge; the cycle found in
    // the quotient must still be realised by concrete steps.
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/caterpillar.lcm")).unwrap();
    let a = myogrid::parse_algorithm(&text).unwrap();
    for (m, n) in [(3, 3), (4, 4), (5, 5)] {
        let r = check(&a, grid(m, n), SynchronyModel::Fsync);
        assert_eq!(r.verdict, Verdict::Nontermination, "{m}x{n}");
        assert!(r.witness.as_ref().unwrap().cycle_start.is_some());
        assert_replays(&a, &r);
    }
}

#[test]
fn stopping_at_the_first_bad_sink_reports_the_same_witness() {
    let early = CheckOptions {
        stop_at_bad_sink: true,
        ..CheckOptions::default()
    };
    let leapfrog = myogrid::parse_algorithm(
        &std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/leapfrog.lcm")).unwrap(),
    )
    .unwrap();
    let cases = [
        (without(&algo("F22T2"), "R3"), grid(2, 4), SynchronyModel::Fsync),
        (leapfrog, grid(6, 6), SynchronyModel::Ssync),
    ];
    for (a, g, model) in cases {
        let full = check(&a, g, model);
        let fast = check_with(&a, g, model, &early);
        assert_ne!(full.verdict, Verdict::Verified);
        assert_eq!(fast.verdict, full.verdict);
        assert_eq!(fast.unvisited, full.unvisited);
        let keys = |r: &CheckReport| -> Vec<Vec<u8>> {
            r.witness.as_ref().unwrap().trace.steps.iter().map(|s| s.state.key()).collect()
        };
        assert_eq!(keys(&fast), keys(&full));
        assert!(fast.stats.canonical <= full.stats.canonical);
    }
    // A correct algorithm is explored completely either way.
    let a = algo("A22T3");
    let full = check(&a, grid(3, 4), SynchronyModel::Async);
    let fast = check_with(&a, grid(3, 4), SynchronyModel::Async, &early);
    assert_eq!(fast.verdict, Verdict::Verified);
    assert_eq!(fast.stats.canonical, full.stats.canonical);
}
