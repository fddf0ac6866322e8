// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use acw_core::agents::{Descriptor, DmaProgram};
use acw_core::axi::Dir;
use acw_harness::designs::{self, region_base, Design, Experiment, START_CYCLE};
use acw_harness::experiments::run_experiment;
use acw_harness::report::ratio_table;
use acw_harness::scenario::{
    read_metrics_csv, run_scenario, run_traced, write_metrics_csv, Probe, ScenarioConfig, ScenarioError,
};
use proptest::prelude::*;

const EXAMPLE: &str = include_str!("../scenarios/wrapped_pair.json");

fn single(design: Design, prog: DmaProgram, probes: Vec<Probe>) -> ScenarioConfig {
    ScenarioConfig {
        topology: designs::topology(design, 2),
        programs: [("c1".to_string(), prog)].into(),
        probes,
        budget: 200_000,
        seed: 1,
        watch: Vec::new(),
        jitter: 0,
    }
}

#[test]
fn example_scenario_runs_clean() {
    let cfg = ScenarioConfig::from_json(EXAMPLE).unwrap();
    let r = run_scenario(&cfg).unwrap();
    assert!(r.complete);
    assert_eq!(r.violations, 0);
    assert_eq!(r.fsm_violations, 0);
    let p = r.probe("c1", 16).unwrap();
    assert_eq!(p.min_cycles, p.max_cycles);
    // The read of p2 is refused; readmission resets c1, which drops the
    // descriptor after it.
    assert_eq!(p.count, 4);
    assert!(r.samples.iter().any(|s| s.controller == "c1" && s.txn_beats == 4 && !s.ok));
    assert_eq!(r.probe("c2", 16).unwrap().count, 4);
}

#[test]
fn scenario_json_round_trips() {
    let cfg = ScenarioConfig::from_json(EXAMPLE).unwrap();
    let back = ScenarioConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(cfg, back);
}

#[test]
fn schema_errors_are_reported() {
    let mut cfg = ScenarioConfig::from_json(EXAMPLE).unwrap();
    cfg.probes.push(Probe::new("c9", 4));
    assert!(matches!(cfg.validate(), Err(ScenarioError::Schema(_))));
    cfg.probes.pop();
    cfg.budget = 0;
    assert!(matches!(cfg.validate(), Err(ScenarioError::Schema(_))));
    assert!(matches!(ScenarioConfig::from_json("{\"budget\": 5"), Err(ScenarioError::Json(_))));
}

#[test]
fn unknown_watch_signal_is_an_error() {
    let mut cfg = ScenarioConfig::from_json(EXAMPLE).unwrap();
    cfg.watch.push("nowhere.x".into());
    assert!(matches!(run_traced(&cfg), Err(ScenarioError::Sim(_))));
}

#[test]
fn trace_records_watch_list() {
    let cfg = ScenarioConfig::from_json(EXAMPLE).unwrap();
    let (r, trace) = run_traced(&cfg).unwrap();
    let mut out = Vec::new();
    trace.write_vcd(&mut out).unwrap();
    let vcd = String::from_utf8(out).unwrap();
    for w in &cfg.watch {
        assert!(vcd.contains(w.as_str()), "{w}");
    }
    assert!(vcd.contains(&format!("#{}", r.cycles)));
}

#[test]
fn budget_exhaustion_is_flagged() {
    let mut cfg = ScenarioConfig::from_json(EXAMPLE).unwrap();
    cfg.budget = 50;
    let r = run_scenario(&cfg).unwrap();
    assert!(!r.complete);
    assert_eq!(r.cycles, 50);
}

#[test]
fn jitter_is_seeded() {
    let mut cfg = ScenarioConfig::from_json(EXAMPLE).unwrap();
    cfg.jitter = 30;
    let a = run_scenario(&cfg).unwrap();
    assert_eq!(a, run_scenario(&cfg).unwrap());
    let starts = |seed| {
        let mut c = cfg.clone();
        c.seed = seed;
        c.effective_programs().values().map(|p| p.start_cycle).collect::<Vec<_>>()
    };
    assert!((1..20).any(|s| starts(s) != starts(0)));
    assert!(starts(3).iter().all(|&s| (40..=70).contains(&s)));
}

#[test]
fn latency_grows_with_burst_length() {
    let base = region_base(0);
    let mut last = 0.0;
    for beats in [1u16, 4, 16, 64, 256] {
        let prog = DmaProgram::legal(vec![Descriptor::new(Dir::Read, base, beats).repeat(3)]).starting_at(START_CYCLE);
        let r = run_scenario(&single(Design::C, prog, vec![Probe::new("c1", u64::from(beats))])).unwrap();
        let m = r.probe("c1", u64::from(beats)).unwrap().mean_cycles;
        assert!(m > last, "{beats}: {m} <= {last}");
        last = m;
    }
}

#[test]
fn bench_csv_feeds_report() {
    let r = run_experiment(Experiment::Interference, 1).unwrap();
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &r.metrics_rows()).unwrap();
    let rows = read_metrics_csv(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), r.rows.len());
    let table = ratio_table(&rows);
    for (t, row) in table.iter().zip(&r.rows) {
        // Without isolation rows the baseline is Design (a) under the same load.
        if row.design == Design::A {
            assert!((t.ratio - 1.0).abs() < 1e-9);
        }
        assert!(t.ratio.is_finite());
    }
}

#[test]
fn interference_hurts_only_the_peripheral_filter() {
    let r = run_experiment(Experiment::Interference, 2).unwrap();
    assert!(r.complete);
    assert_eq!(r.fsm_violations, 0);
    for (_, ratio) in r.ratios(Design::B) {
        assert!(ratio > 1.2, "{ratio}");
    }
    for d in [Design::A, Design::C] {
        for (_, ratio) in r.ratios(d) {
            assert!((ratio - 1.0).abs() < 0.02, "{d}: {ratio}");
        }
    }
}

fn own_region_ops() -> impl Strategy<Value = Vec<(bool, u64, u16)>> {
    proptest::collection::vec((any::<bool>(), 0u64..0x1000, 1u16..=32), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Legal traffic through a wrapper costs exactly one cycle per
    /// transaction over the unwrapped path.
    #[test]
    fn wrapper_costs_one_cycle(ops in own_region_ops()) {
        let d: Vec<Descriptor> = ops
            .iter()
            .map(|&(w, off, beats)| Descriptor::new(if w { Dir::Write } else { Dir::Read }, region_base(0) + 4 * off, beats))
            .collect();
        let prog = DmaProgram::legal(d).starting_at(START_CYCLE);
        let run = |design| run_scenario(&single(design, prog.clone(), Vec::new())).unwrap();
        let (a, c) = (run(Design::A), run(Design::C));
        prop_assert!(a.complete && c.complete);
        prop_assert_eq!(c.fsm_violations, 0);
        prop_assert_eq!(a.samples.len(), ops.len());
        prop_assert_eq!(a.samples.len(), c.samples.len());
        for (sa, sc) in a.samples.iter().zip(&c.samples) {
            prop_assert!(sa.ok && sc.ok);
            prop_assert_eq!(sc.cycles, sa.cycles + 1);
            prop_assert!(sa.cycles > sa.txn_beats);
        }
    }

    #[test]
    fn runs_are_deterministic(ops in own_region_ops(), seed in 0u64..1000) {
        let d: Vec<Descriptor> =
            ops.iter().map(|&(w, off, b)| Descriptor::new(if w { Dir::Write } else { Dir::Read }, region_base(0) + 4 * off, b)).collect();
        let mut cfg = single(Design::C, DmaProgram::legal(d).with_outstanding(4).starting_at(START_CYCLE), Vec::new());
        cfg.seed = seed;
        cfg.jitter = 16;
        prop_assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    }
}

#[test]
fn programs_default_to_idle() {
    let mut cfg = single(Design::B, DmaProgram::legal(Vec::new()), Vec::new());
    cfg.programs = BTreeMap::new();
    let r = run_scenario(&cfg).unwrap();
    assert!(r.complete);
    assert!(r.samples.is_empty());
}
