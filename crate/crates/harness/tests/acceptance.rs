// SPDX-License-Identifier: Apache-2.0

//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances are pinned in the constants below.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use acw_core::acw::{check_legal, Fault, Lacp, Region, Verdict};
use acw_core::agents::{Descriptor, Dma, DmaProgram};
use acw_core::axi::{AxiRequest, Burst, Dir};
use acw_core::kernel::Simulation;
use acw_core::topology::TaintSource;
use acw_harness::designs::{self, Design, Experiment, CONTROLLERS, PROBE_BEATS, START_CYCLE};
use acw_harness::experiments::{run_experiment, ComparisonReport, DEFAULT_REPS};
use acw_harness::monitor::run_monitored;
use acw_harness::mutation::{run_mutation, MUTANTS};
use acw_harness::testbench::{self, Testbench, SYSTEM_CYCLES};
use acw_secprops::{parse_property, Level};

const OVERHEAD_SIZES: [usize; 4] = [2, 4, 8, 16];
const OVERHEAD_BURSTS: [u16; 3] = [1, 16, 256];
const OVERHEAD_RUNTIME: Duration = Duration::from_secs(10);
const PARITY_TOL: f64 = 0.02;
const INTERFERENCE_MIN: f64 = 1.20;
const INTERFERENCE_MIN_16: f64 = 2.0;
const DOS_MIN: f64 = 2.0;
const DOS_MIN_16: f64 = 10.0;
const UNAFFECTED_TOL: f64 = 0.02;
const SUITE_SIZES: [(Level, usize, usize); 3] =
    [(Level::Ip, 164, 152), (Level::Firmware, 1436, 2), (Level::System, 76, 0)];
const ORACLE_RUNTIME: Duration = Duration::from_secs(60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Mode-machine findings collected across every run below.
#[derive(Default)]
struct FsmTally {
    runs: usize,
    cycles: u64,
    violations: Vec<String>,
}

impl FsmTally {
    fn add(&mut self, what: &str, cycles: u64, violations: usize) {
        self.runs += 1;
        self.cycles += cycles;
        if violations > 0 {
            self.violations.push(format!("{what}: {violations}"));
        }
    }

    fn add_report(&mut self, r: &ComparisonReport) {
        self.add(r.experiment.label(), 0, r.fsm_violations);
    }
}

fn run_until_done(sim: &mut Simulation, acws: &[String], cap: u64, fsm: &mut FsmTally, what: &str) -> bool {
    let mut m = acw_harness::monitor::FsmMonitor::new(acws.iter().cloned());
    let mut done = false;
    for _ in 0..cap {
        sim.step().expect("step");
        m.check(sim).expect("monitor");
        if sim.component::<Dma>("c1").is_some_and(Dma::finished) {
            done = true;
            break;
        }
    }
    fsm.add(what, m.cycles, m.violations.len());
    done
}

fn latencies(design: Design, nr: usize, nw: usize, beats: u16, fsm: &mut FsmTally) -> Option<Vec<u64>> {
    let mut t = designs::topology(design, nr);
    for a in &mut t.acws {
        a.config.n_read = nr;
        a.config.n_write = nw;
    }
    let base = designs::region_base(0);
    let prog = DmaProgram::legal(vec![
        Descriptor::new(Dir::Read, base, beats).repeat(4),
        Descriptor::new(Dir::Write, base + 0x1000, beats).repeat(4),
    ])
    .starting_at(START_CYCLE);
    let mut sim = t.build(&[("c1".to_string(), prog)].into()).expect("build");
    let acws: Vec<String> = t.acws.iter().map(|a| a.name.clone()).collect();
    if !run_until_done(&mut sim, &acws, 100_000, fsm, "overhead") {
        return None;
    }
    sim.component::<Dma>("c1").expect("c1").records().iter().map(|r| r.latency()).collect()
}

fn one_cycle_overhead(fsm: &mut FsmTally) -> Outcome {
    let t0 = Instant::now();
    let mut bad = Vec::new();
    let mut checked = 0;
    for &beats in &OVERHEAD_BURSTS {
        let Some(a) = latencies(Design::A, 2, 2, beats, fsm) else {
            return outcome(false, format!("design (a) did not finish at {beats} beats"));
        };
        for &nr in &OVERHEAD_SIZES {
            for &nw in &OVERHEAD_SIZES {
                match latencies(Design::C, nr, nw, beats, fsm) {
                    Some(c) if c.len() == a.len() => {
                        checked += c.len();
                        if c.iter().zip(&a).any(|(c, a)| *c != a + 1) {
                            bad.push(format!("n_r={nr} n_w={nw} beats={beats}"));
                        }
                    }
                    _ => bad.push(format!("n_r={nr} n_w={nw} beats={beats}: incomplete")),
                }
            }
        }
    }
    let dt = t0.elapsed();
    let pass = bad.is_empty() && dt < OVERHEAD_RUNTIME;
    let mut d = format!(
        "{checked} transactions at exactly +1 cycle, {:.2}s (limit {}s)",
        dt.as_secs_f64(),
        OVERHEAD_RUNTIME.as_secs()
    );
    if !bad.is_empty() {
        d = format!("mismatch at {}", bad.join(", "));
    }
    outcome(pass, d)
}

fn isolation_parity(iso: &ComparisonReport) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut complete = iso.complete;
    for c in CONTROLLERS {
        for &b in &PROBE_BEATS {
            let ms: Vec<f64> = Design::ALL
                .iter()
                .filter_map(|&d| {
                    iso.rows.iter().find(|r| r.design == d && r.metrics.controller == c && r.metrics.txn_beats == b)
                })
                .map(|r| r.metrics.mean_cycles)
                .collect();
            complete &= ms.len() == 3 && ms.iter().all(|m| m.is_finite());
            let (lo, hi) = ms.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &m| (lo.min(m), hi.max(m)));
            worst = worst.max(hi / lo - 1.0);
        }
    }
    outcome(
        complete && worst <= PARITY_TOL,
        format!("max spread {:.2}% (limit {:.0}%)", 100.0 * worst, 100.0 * PARITY_TOL),
    )
}

/// Design (b) above the bounds; (a) and (c) within tolerance of their
/// own isolation mean.
fn contention(r: &ComparisonReport, iso: &ComparisonReport, min: f64, min16: f64) -> Outcome {
    let mut pass = r.complete;
    let mut parts = Vec::new();
    for &b in &PROBE_BEATS {
        let rb = r.ratio(Design::B, "c1", b).unwrap_or(f64::NAN);
        let floor = if b == 16 { min16 } else { min };
        pass &= rb >= floor;
        parts.push(format!("{b}:{rb:.2}x"));
        for d in [Design::A, Design::C] {
            let own = |rep: &ComparisonReport| {
                rep.rows
                    .iter()
                    .find(|x| x.design == d && x.metrics.controller == "c1" && x.metrics.txn_beats == b)
                    .map_or(f64::NAN, |x| x.metrics.mean_cycles)
            };
            let change = (own(r) / own(iso) - 1.0).abs();
            if change.is_nan() || change >= UNAFFECTED_TOL {
                pass = false;
                parts.push(format!("({d}) changed {:.2}% at {b}", 100.0 * change));
            }
        }
    }
    outcome(
        pass,
        format!(
            "(b) {} (floors {min16}x at 16, {min}x elsewhere); (a),(c) within {:.0}%",
            parts.join(" "),
            100.0 * UNAFFECTED_TOL
        ),
    )
}

fn suite_sizes() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (level, ift, trace) in SUITE_SIZES {
        let props = testbench::suite_properties(level).expect("suite");
        let n_ift = props.iter().filter(|p| p.kind() == acw_secprops::Kind::Ift).count();
        let n_trace = props.len() - n_ift;
        pass &= n_ift == ift && n_trace == trace;
        parts.push(format!("{level} {} ({n_ift}+{n_trace})", props.len()));
    }
    outcome(pass, parts.join(", "))
}

fn baselines_and_mutants() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for level in Level::ALL {
        let r = run_mutation(level, None).expect("baseline");
        pass &= r.clean();
        parts.push(format!("{level} {}/{} pass", r.summary.pass, r.summary.total));
    }
    let mut survivors = Vec::new();
    for m in &MUTANTS {
        let kills: usize = Level::ALL.iter().map(|&l| run_mutation(l, Some(m)).expect("mutant").summary.fail).sum();
        if kills == 0 {
            survivors.push(m.id);
        }
    }
    pass &= survivors.is_empty();
    let killed = MUTANTS.len() - survivors.len();
    let mut d = format!("{}; {killed}/{} mutants killed", parts.join(", "), MUTANTS.len());
    if !survivors.is_empty() {
        d += &format!(", survivors: {}", survivors.join(", "));
    }
    outcome(pass, d)
}

fn byte_oracle(lacp: &Lacp, req: &AxiRequest) -> Verdict {
    if req.validate().is_err() {
        return Verdict::Illegal;
    }
    let bytes: Vec<u64> = req.beat_addresses().into_iter().flat_map(|a| a..a + req.beat_bytes()).collect();
    let inside = lacp
        .regions(req.dir)
        .iter()
        .filter(|r| r.size > 0)
        .any(|r| bytes.iter().all(|&b| b >= r.base && b < r.base + r.size));
    if inside {
        Verdict::Legal
    } else {
        Verdict::Illegal
    }
}

fn oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    // Adjacent, overlapping, empty, unaligned and top-of-space regions.
    let lacp = Lacp::new(
        vec![
            Region::new(0x0000, 0x0040),
            Region::new(0x0040, 0x0040),
            Region::new(0x1003, 0x0011),
            Region::new(0x2000, 0),
            Region::new(0x8000, 0x1000),
            Region::new(0x8800, 0x1000),
            Region::new(0xFFC0, 0x0040),
        ],
        vec![Region::new(0x0100, 0x0100), Region::new(0x4001, 0x00FE), Region::new(0xFFF0, 0x0010)],
    );
    let mut checked = 0u64;
    let mut mismatches = 0u64;
    for addr in 0u64..0x1_0000 {
        for len in [0u8, 1, 3, 15] {
            for size in 0u8..3 {
                for burst in [Burst::Fixed, Burst::Incr, Burst::Wrap] {
                    for dir in [Dir::Read, Dir::Write] {
                        let req = AxiRequest { id: 0, addr, len, size, burst, dir };
                        checked += 1;
                        if check_legal(&lacp, &req) != byte_oracle(&lacp, &req) {
                            mismatches += 1;
                        }
                    }
                }
            }
        }
    }
    let dt = t0.elapsed();
    outcome(
        mismatches == 0 && dt < ORACLE_RUNTIME,
        format!(
            "{checked} requests, {mismatches} mismatches, {:.2}s (limit {}s)",
            dt.as_secs_f64(),
            ORACLE_RUNTIME.as_secs()
        ),
    )
}

/// Cycles at which a `from` label was seen on a signal under `prefixes`.
fn flows(sim: &mut Simulation, cycles: u64, pairs: &[(&str, &[&str])]) -> (Vec<String>, u64) {
    let mut hits = Vec::new();
    let mut observed = 0;
    for _ in 0..cycles {
        sim.step().expect("step");
        for (label, prefixes) in pairs {
            let id = sim.taint_names().lookup(label).expect("label");
            for p in *prefixes {
                for s in sim.registry().matching(p) {
                    observed += 1;
                    if sim.registry().taint(s).contains(id) && hits.len() < 4 {
                        hits.push(format!("{label}->{} @{}", sim.registry().name(s), sim.cycle()));
                    }
                }
            }
        }
    }
    (hits, observed)
}

fn system_run(fault: Option<Fault>) -> (Vec<String>, u64, bool) {
    let mut bench = testbench::system(fault, 1);
    bench.topology.taint = vec![
        TaintSource { label: "C1".into(), prefixes: vec!["c1.m.".into()] },
        TaintSource { label: "C2".into(), prefixes: vec!["c2.m.".into()] },
    ];
    let mut sim = bench.build().expect("build");
    let (hits, observed) =
        flows(&mut sim, SYSTEM_CYCLES, &[("C1", &["p3.", "xbar.s2."]), ("C2", &["p1.", "xbar.s0."])]);
    let busy = ["c1", "c2"]
        .iter()
        .all(|c| sim.component::<Dma>(c).is_some_and(|d| d.records().iter().any(|r| r.done_cycle.is_some())));
    (hits, observed, busy)
}

fn system_no_flow() -> Outcome {
    let (hits, observed, busy) = system_run(None);
    // The same probe must see the flow once the policy check is skipped.
    let (leaks, _, _) = system_run(Some(Fault::SkipRegionCheck));
    let pass = hits.is_empty() && busy && !leaks.is_empty();
    let mut d = format!(
        "{SYSTEM_CYCLES} cycles, {observed} signal samples, {} flows; unchecked wrapper leaks: {}",
        hits.len(),
        if leaks.is_empty() { "none (probe blind)".to_string() } else { leaks[0].clone() }
    );
    if !hits.is_empty() {
        d += &format!(", first: {}", hits.join(", "));
    }
    outcome(pass, d)
}

fn bench_monitor(fsm: &mut FsmTally) {
    for level in Level::ALL {
        let b = Testbench::new(level, None).expect("bench");
        let mut sim = b.build().expect("build");
        let acws: Vec<String> = b.topology.acws.iter().map(|a| a.name.clone()).collect();
        let m = run_monitored(&mut sim, &acws, b.cycles).expect("run");
        fsm.add(level.name(), m.cycles, m.violations.len());
    }
}

fn round_trip() -> Outcome {
    let mut total = 0;
    let mut bad = Vec::new();
    for level in Level::ALL {
        for p in testbench::suite_properties(level).expect("suite") {
            total += 1;
            match parse_property(&p.ast.to_string()) {
                Ok(ast) if ast == p.ast => {}
                _ => bad.push(p.id),
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{}/{total} properties round-trip{}",
            total - bad.len(),
            if bad.is_empty() { String::new() } else { format!(", first failure {}", bad[0]) }
        ),
    )
}

fn main() -> ExitCode {
    let mut fsm = FsmTally::default();
    let mut results: BTreeMap<u8, (&str, Outcome)> = BTreeMap::new();

    results.insert(1, ("one-cycle overhead", one_cycle_overhead(&mut fsm)));

    let iso = run_experiment(Experiment::Isolation, DEFAULT_REPS).expect("isolation");
    let intf = run_experiment(Experiment::Interference, DEFAULT_REPS).expect("interference");
    let dos = run_experiment(Experiment::Dos, DEFAULT_REPS).expect("dos");
    for r in [&iso, &intf, &dos] {
        fsm.add_report(r);
    }
    results.insert(2, ("isolation parity", isolation_parity(&iso)));
    results.insert(3, ("interference lower bound", contention(&intf, &iso, INTERFERENCE_MIN, INTERFERENCE_MIN_16)));
    results.insert(4, ("DoS lower bound", contention(&dos, &iso, DOS_MIN, DOS_MIN_16)));
    results.insert(5, ("suite sizes", suite_sizes()));
    results.insert(6, ("baseline pass / mutation kill", baselines_and_mutants()));
    results.insert(7, ("oracle equivalence", oracle_equivalence()));
    results.insert(8, ("system-level no-flow", system_no_flow()));

    bench_monitor(&mut fsm);
    let fsm_ok = fsm.violations.is_empty();
    let mut d =
        format!("{} monitored runs, {} zero violations", fsm.runs, if fsm_ok { "all with" } else { "not all with" });
    if !fsm_ok {
        d += &format!(": {}", fsm.violations.join(", "));
    }
    results.insert(9, ("FSM conformance", outcome(fsm_ok, d)));
    results.insert(10, ("parser round-trip", round_trip()));

    let mut all = true;
    for (n, (name, o)) in &results {
        all &= o.pass;
        println!("criterion {n:>2} {:<4} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
