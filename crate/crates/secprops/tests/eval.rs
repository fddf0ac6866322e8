// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use acw_core::agents::{Descriptor, DmaProgram, MemoryConfig};
use acw_core::axi::Dir;
use acw_core::kernel::{SimError, Simulation, Trace};
use acw_core::topology::{TaintSource, TopologyConfig};
use acw_secprops::{
    differential, eval_ift, eval_suite, eval_trace, parse_property, EvalError, Property, RunPlan, Status,
};
use proptest::prelude::*;

fn prop(id: &str, text: &str) -> Property {
    Property { id: id.into(), ast: parse_property(text).unwrap() }
}

fn topo() -> TopologyConfig {
    TopologyConfig {
        controllers: vec!["c0".into()],
        peripherals: vec![MemoryConfig::new("p0", 0x1000, 0x40)],
        ..TopologyConfig::default()
    }
}

fn build(descs: Vec<Descriptor>) -> Result<Simulation, SimError> {
    let progs: BTreeMap<String, DmaProgram> = [("c0".to_string(), DmaProgram::legal(descs))].into();
    topo().build(&progs)
}

fn write_then_read() -> Vec<Descriptor> {
    vec![Descriptor::new(Dir::Write, 0x1000, 4), Descriptor::new(Dir::Read, 0x1000, 4)]
}

#[test]
fn trace_defaults_during_reset_pass() {
    let names = ["ARESETN", "acw0.r_state", "acw0.cfg.rd0_base_lo"];
    let t = Trace::from_rows(&names, &[(1, vec![0, 0, 0]), (2, vec![1, 0, 0]), (3, vec![1, 1, 0x1000])]);
    let p = prop("r2", "acw0.cfg.rd0_base_lo == 0 unless (ARESETN != 0 && acw0.r_state != 2'b00)");
    let r = eval_trace(&p, &t).unwrap();
    assert_eq!(r.status, Status::Pass);
}

#[test]
fn trace_stuck_interrupt_fails_every_cycle() {
    let names = ["acw0.intr_w", "acw0.w_state"];
    let rows: Vec<_> = (1..=6).map(|c| (c, vec![0, if (3..=5).contains(&c) { 2 } else { 1 }])).collect();
    let t = Trace::from_rows(&names, &rows);
    let r = eval_trace(&prop("r4", "acw0.intr_w == 1 unless (acw0.w_state != 2'b10)"), &t).unwrap();
    assert_eq!(r.status, Status::Fail);
    assert_eq!(r.failure_cycles, vec![3, 4, 5]);
}

#[test]
fn trace_never_enabled_is_not_covered() {
    let t = Trace::from_rows(&["a", "b"], &[(1, vec![0, 1]), (2, vec![0, 1])]);
    let r = eval_trace(&prop("x", "a == 1 unless (b == 1)"), &t).unwrap();
    assert_eq!(r.status, Status::NotCovered);
    assert!(matches!(eval_trace(&prop("y", "zz == 1"), &t), Err(EvalError::NotWatched { .. })));
}

#[test]
fn direct_copy_is_a_flow() {
    let mut sim = build(write_then_read()).unwrap();
    let r = eval_ift(&prop("f", "c0.m.WDATA =/=> p0.word[0x1000]"), &mut sim, &RunPlan::cycles(80)).unwrap();
    assert_eq!(r.status, Status::Fail);

    // Same run with an always-on label from the topology: both mechanisms
    // must see the word tainted first on the same cycle.
    let mut t = topo();
    t.taint = vec![TaintSource { label: "w".into(), prefixes: vec!["c0.m.WDATA".into()] }];
    let progs: BTreeMap<String, DmaProgram> = [("c0".to_string(), DmaProgram::legal(write_then_read()))].into();
    let mut sim = t.build(&progs).unwrap();
    let mut first = None;
    for _ in 0..80 {
        sim.step().unwrap();
        if first.is_none() && !sim.read_signal("p0.word[0x1000]").unwrap().1.is_empty() {
            first = Some(sim.cycle());
        }
    }
    assert_eq!(r.first_failure(), first);
}

#[test]
fn flow_reaches_read_data_back() {
    let mut sim = build(write_then_read()).unwrap();
    let props = [
        prop("a", "c0.m.WDATA =/=> c0.m.ARADDR"),
        prop("b", "c0.m.WDATA =/=> xbar.m0.RDATA"),
        prop("c", "c0.m.WDATA when (ARESETN == 2) =/=> xbar.m0.RDATA"),
        prop("d", "c0.m.WDATA =/=> xbar.m0.RDATA unless (1 == 1)"),
        prop("e", "c0.m.RREADY == 1 unless (ARESETN == 0)"),
    ];
    let r = eval_suite(&props, &mut sim, &RunPlan::cycles(80)).unwrap();
    let st: Vec<_> = r.iter().map(|r| r.status).collect();
    assert_eq!(st, [Status::Pass, Status::Fail, Status::NotCovered, Status::Pass, Status::Pass]);
}

#[test]
fn evaluation_errors() {
    let mut sim = build(vec![]).unwrap();
    let e = eval_ift(&prop("u", "c0.m.WDATA =/=> nowhere"), &mut sim, &RunPlan::cycles(1)).unwrap_err();
    assert!(matches!(e, EvalError::UnknownSignal { .. }));
    let e = eval_ift(&prop("p", "`src` =/=> p0.mem"), &mut sim, &RunPlan::cycles(1)).unwrap_err();
    assert!(matches!(e, EvalError::Placeholder { .. }));
    let e = eval_ift(&prop("l", "c0.m.WDATA =/=> 3"), &mut sim, &RunPlan::cycles(1)).unwrap_err();
    assert!(matches!(e, EvalError::NotASignal { .. }));
}

#[test]
fn differential_agrees_on_fixed_cases() {
    let mk = || build(write_then_read());
    let plan = RunPlan::cycles(80);
    let p = prop("f", "c0.m.WDATA =/=> xbar.m0.RDATA");
    let d = differential(&p, &mk, &plan, (0x5a5a, 0xa5a5)).unwrap();
    assert!(!d.diverged.is_empty());
    assert!(d.exercised);
    let mut sim = mk().unwrap();
    let r = eval_ift(&p, &mut sim, &plan).unwrap();
    assert_eq!(r.status, Status::Fail);
    assert!(r.first_failure().unwrap() <= d.diverged[0]);

    let q = prop("g", "p0.s.RDATA =/=> c0.m.WDATA");
    assert!(differential(&q, &mk, &plan, (1, 2)).unwrap().diverged.is_empty());
}

// Data fields only: forcing a length or a valid changes timing, which value
// taint does not follow.
const SOURCES: [&str; 4] = ["c0.m.WDATA", "c0.m.ARADDR", "c0.m.AWADDR", "p0.s.RDATA"];
const DESTS: [&str; 6] =
    ["p0.word[0x1000]", "p0.word[0x1008]", "xbar.m0.RDATA", "xbar.s0.AWADDR", "p0.mem", "c0.m.WDATA"];

fn descriptor() -> impl Strategy<Value = Descriptor> {
    (any::<bool>(), 0u64..8, 1u16..4).prop_map(|(w, slot, beats)| {
        let dir = if w { Dir::Write } else { Dir::Read };
        Descriptor::new(dir, 0x1000 + 4 * slot, beats)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Whenever forcing the source to two values changes the destination at
    // an enabled cycle, the taint verdict is Fail.
    #[test]
    fn differential_divergence_implies_taint_failure(
        descs in prop::collection::vec(descriptor(), 1..5),
        s in 0..SOURCES.len(),
        d in 0..DESTS.len(),
        gated in any::<bool>(),
    ) {
        let text = if gated {
            format!("{} when (ARESETN == 1) =/=> {}", SOURCES[s], DESTS[d])
        } else {
            format!("{} =/=> {}", SOURCES[s], DESTS[d])
        };
        let p = prop("x", &text);
        let plan = RunPlan::cycles(120);
        let mk = || build(descs.clone());
        let diff = differential(&p, &mk, &plan, (0x1000, 0x1004)).unwrap();
        let mut sim = mk().unwrap();
        let r = eval_ift(&p, &mut sim, &plan).unwrap();
        if let Some(&c) = diff.diverged.first() {
            prop_assert_eq!(r.status, Status::Fail);
            prop_assert!(r.first_failure().unwrap() <= c);
        }
    }
}
