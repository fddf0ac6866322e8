// SPDX-License-Identifier: Apache-2.0

//! Property evaluation over traces and instrumented simulations.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use acw_core::kernel::{Injector, Override, SignalId, SignalRegistry, SimError, Simulation, TaintId, Trace};
use serde::{Deserialize, Serialize};

use crate::ast::{Expr, Kind, PropertyAst};
use crate::suite::Property;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotCovered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub id: String,
    pub kind: Kind,
    pub failure_count: u64,
    pub failure_cycles: Vec<u64>,
    pub status: Status,
}

impl PropertyResult {
    fn new(id: &str, kind: Kind, failure_cycles: Vec<u64>, covered: bool) -> Self {
        let status = if !failure_cycles.is_empty() {
            Status::Fail
        } else if covered {
            Status::Pass
        } else {
            Status::NotCovered
        };
        Self { id: id.to_string(), kind, failure_count: failure_cycles.len() as u64, failure_cycles, status }
    }

    pub fn first_failure(&self) -> Option<u64> {
        self.failure_cycles.first().copied()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{id}: placeholder `{name}` left in a concrete property")]
    Placeholder { id: String, name: String },
    #[error("{id}: unknown signal `{name}`")]
    UnknownSignal { id: String, name: String },
    #[error("{id}: `{name}` is not in the trace")]
    NotWatched { id: String, name: String },
    #[error("{id}: {what} must be a signal or a conjunction of signals")]
    NotASignal { id: String, what: &'static str },
    #[error("{0}")]
    Sim(#[from] SimError),
}

/// Expression with signals resolved to slots.
#[derive(Debug, Clone)]
enum Compiled {
    Slot(usize),
    Lit(u64),
    Eq(Box<Compiled>, Box<Compiled>),
    Ne(Box<Compiled>, Box<Compiled>),
    And(Box<Compiled>, Box<Compiled>),
}

impl Compiled {
    fn build(e: &Expr, id: &str, slot: &mut impl FnMut(&str) -> Result<usize, EvalError>) -> Result<Self, EvalError> {
        Ok(match e {
            Expr::Signal(s) => Compiled::Slot(slot(s)?),
            Expr::Placeholder(p) => return Err(EvalError::Placeholder { id: id.into(), name: p.clone() }),
            Expr::Lit { value, .. } => Compiled::Lit(*value),
            Expr::Eq(a, b) => Compiled::Eq(Box::new(Self::build(a, id, slot)?), Box::new(Self::build(b, id, slot)?)),
            Expr::Ne(a, b) => Compiled::Ne(Box::new(Self::build(a, id, slot)?), Box::new(Self::build(b, id, slot)?)),
            Expr::And(a, b) => Compiled::And(Box::new(Self::build(a, id, slot)?), Box::new(Self::build(b, id, slot)?)),
        })
    }

    fn eval(&self, get: &impl Fn(usize) -> u64) -> u64 {
        match self {
            Compiled::Slot(i) => get(*i),
            Compiled::Lit(v) => *v,
            Compiled::Eq(a, b) => u64::from(a.eval(get) == b.eval(get)),
            Compiled::Ne(a, b) => u64::from(a.eval(get) != b.eval(get)),
            Compiled::And(a, b) => u64::from(a.eval(get) != 0 && b.eval(get) != 0),
        }
    }

    fn holds(&self, get: &impl Fn(usize) -> u64) -> bool {
        self.eval(get) != 0
    }
}

fn check_concrete(p: &Property) -> Result<(), EvalError> {
    match p.ast.placeholders().into_iter().next() {
        Some(name) => Err(EvalError::Placeholder { id: p.id.clone(), name }),
        None => Ok(()),
    }
}

fn sim_slot<'a>(reg: &'a SignalRegistry, id: &'a str) -> impl FnMut(&str) -> Result<usize, EvalError> + 'a {
    move |name: &str| {
        reg.id(name).map(|s| s.index()).map_err(|_| EvalError::UnknownSignal { id: id.into(), name: name.into() })
    }
}

fn reg_value(reg: &SignalRegistry) -> impl Fn(usize) -> u64 + '_ {
    move |i| reg.value(SignalId(i as u32))
}

/// Checks a trace property on every sampled cycle.
pub fn eval_trace(prop: &Property, trace: &Trace) -> Result<PropertyResult, EvalError> {
    check_concrete(prop)?;
    let PropertyAst::Trace { assertion, unless_cond } = &prop.ast else {
        return Err(EvalError::NotASignal { id: prop.id.clone(), what: "a trace check" });
    };
    let mut slot =
        |name: &str| trace.column(name).map_err(|_| EvalError::NotWatched { id: prop.id.clone(), name: name.into() });
    let a = Compiled::build(assertion, &prop.id, &mut slot)?;
    let u = unless_cond.as_ref().map(|c| Compiled::build(c, &prop.id, &mut slot)).transpose()?;
    let mut fails = Vec::new();
    let mut covered = false;
    for row in 0..trace.len() {
        let get = |c: usize| trace.at(row, c);
        if u.as_ref().is_some_and(|u| u.holds(&get)) {
            continue;
        }
        covered = true;
        if !a.holds(&get) {
            fails.push(trace.cycles()[row]);
        }
    }
    Ok(PropertyResult::new(&prop.id, Kind::Trace, fails, covered))
}

/// How long to run an instrumented simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunPlan {
    pub cycles: u64,
}

impl RunPlan {
    pub fn cycles(cycles: u64) -> Self {
        Self { cycles }
    }
}

fn expr_signals(e: &Expr, id: &str, what: &'static str) -> Result<Vec<String>, EvalError> {
    match e {
        Expr::Signal(s) => Ok(vec![s.clone()]),
        Expr::And(a, b) => {
            let mut v = expr_signals(a, id, what)?;
            v.extend(expr_signals(b, id, what)?);
            Ok(v)
        }
        _ => Err(EvalError::NotASignal { id: id.into(), what }),
    }
}

type Resolved = (Vec<SignalId>, Vec<SignalId>, Option<Compiled>, Option<Compiled>);

fn resolve_ift(ast: &PropertyAst, id: &str, reg: &SignalRegistry) -> Result<Resolved, EvalError> {
    let PropertyAst::Ift { source, tag_cond, dest, unless_cond } = ast else {
        return Err(EvalError::NotASignal { id: id.into(), what: "an information-flow check" });
    };
    let mut slot = sim_slot(reg, id);
    let mut ids = |names: Vec<String>| -> Result<Vec<SignalId>, EvalError> {
        names.iter().map(|s| slot(s).map(|i| SignalId(i as u32))).collect()
    };
    let srcs = ids(expr_signals(source, id, "the source")?)?;
    let dsts = ids(expr_signals(dest, id, "the destination")?)?;
    let mut slot = sim_slot(reg, id);
    let tag = tag_cond.as_ref().map(|c| Compiled::build(c, id, &mut slot)).transpose()?;
    let unless = unless_cond.as_ref().map(|c| Compiled::build(c, id, &mut slot)).transpose()?;
    Ok((srcs, dsts, tag, unless))
}

struct IftCheck {
    idx: usize,
    label: TaintId,
    dests: Vec<SignalId>,
    unless: Option<Compiled>,
    covered: Arc<AtomicBool>,
}

struct TraceCheck {
    idx: usize,
    assertion: Compiled,
    unless: Option<Compiled>,
    covered: bool,
}

/// Evaluates every property in one instrumented run of `sim`.
///
/// Each distinct (source, tag condition) pair gets its own taint label,
/// attached to the source signals on every cycle where the condition
/// holds. An IFT property fails on each cycle where its destination carries
/// the label while its `unless` condition is false. Trace properties are
/// checked against the same run.
pub fn eval_suite(props: &[Property], sim: &mut Simulation, plan: &RunPlan) -> Result<Vec<PropertyResult>, EvalError> {
    let mut ifts = Vec::new();
    let mut traces = Vec::new();
    let mut labels: HashMap<String, (TaintId, Arc<AtomicBool>)> = HashMap::new();
    for (idx, p) in props.iter().enumerate() {
        check_concrete(p)?;
        match &p.ast {
            PropertyAst::Ift { source, tag_cond, .. } => {
                let (src_ids, dests, tag, unless) = resolve_ift(&p.ast, &p.id, sim.registry())?;
                let key = match tag_cond {
                    Some(c) => format!("{source} when ({c})"),
                    None => source.to_string(),
                };
                let (label, covered) = match labels.get(&key) {
                    Some(l) => l.clone(),
                    None => {
                        let label = sim.declare_taint(format!("ift[{key}]"));
                        let covered = Arc::new(AtomicBool::new(false));
                        let flag = covered.clone();
                        let when: Box<dyn Fn(&SignalRegistry) -> bool + Send> = match tag {
                            Some(t) => Box::new(move |reg: &SignalRegistry| {
                                let on = t.holds(&reg_value(reg));
                                if on {
                                    flag.store(true, Ordering::Relaxed);
                                }
                                on
                            }),
                            None => Box::new(move |_: &SignalRegistry| {
                                flag.store(true, Ordering::Relaxed);
                                true
                            }),
                        };
                        sim.add_injector(Injector { label, targets: src_ids, when: Some(when) });
                        labels.insert(key, (label, covered.clone()));
                        (label, covered)
                    }
                };
                ifts.push(IftCheck { idx, label, dests, unless, covered });
            }
            PropertyAst::Trace { assertion, unless_cond } => {
                let mut slot = sim_slot(sim.registry(), &p.id);
                let assertion = Compiled::build(assertion, &p.id, &mut slot)?;
                let unless = unless_cond.as_ref().map(|c| Compiled::build(c, &p.id, &mut slot)).transpose()?;
                traces.push(TraceCheck { idx, assertion, unless, covered: false });
            }
        }
    }

    let mut fails: Vec<Vec<u64>> = vec![Vec::new(); props.len()];
    for _ in 0..plan.cycles {
        sim.step()?;
        let cycle = sim.cycle();
        let reg = sim.registry();
        let get = reg_value(reg);
        for c in &ifts {
            if c.unless.as_ref().is_some_and(|u| u.holds(&get)) {
                continue;
            }
            if c.dests.iter().any(|&d| reg.taint(d).contains(c.label)) {
                fails[c.idx].push(cycle);
            }
        }
        for c in traces.iter_mut() {
            if c.unless.as_ref().is_some_and(|u| u.holds(&get)) {
                continue;
            }
            c.covered = true;
            if !c.assertion.holds(&get) {
                fails[c.idx].push(cycle);
            }
        }
    }

    let mut out: Vec<Option<PropertyResult>> = vec![None; props.len()];
    for c in &ifts {
        let f = std::mem::take(&mut fails[c.idx]);
        out[c.idx] = Some(PropertyResult::new(&props[c.idx].id, Kind::Ift, f, c.covered.load(Ordering::Relaxed)));
    }
    for c in &traces {
        let f = std::mem::take(&mut fails[c.idx]);
        out[c.idx] = Some(PropertyResult::new(&props[c.idx].id, Kind::Trace, f, c.covered));
    }
    Ok(out.into_iter().map(|r| r.expect("every property checked")).collect())
}

/// Single-property form of [`eval_suite`].
pub fn eval_ift(prop: &Property, sim: &mut Simulation, plan: &RunPlan) -> Result<PropertyResult, EvalError> {
    if prop.kind() != Kind::Ift {
        return Err(EvalError::NotASignal { id: prop.id.clone(), what: "an information-flow check" });
    }
    Ok(eval_suite(std::slice::from_ref(prop), sim, plan)?.remove(0))
}

/// Outcome of comparing two runs that differ only in the source value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Differential {
    /// Enabled cycles where the destination values differed.
    pub diverged: Vec<u64>,
    /// Whether the tag condition held at least once.
    pub exercised: bool,
}

/// Two-run cross-check for an IFT property: `build` must return identical
/// simulations. The source is forced to `values.0` in one run and
/// `values.1` in the other on every cycle where the tag condition holds.
pub fn differential(
    prop: &Property,
    build: &dyn Fn() -> Result<Simulation, SimError>,
    plan: &RunPlan,
    values: (u64, u64),
) -> Result<Differential, EvalError> {
    check_concrete(prop)?;
    let exercised = Arc::new(AtomicBool::new(false));
    let mut runs = Vec::new();
    let mut unless_c = None;
    let mut dest_ids = Vec::new();
    for v in [values.0, values.1] {
        let mut sim = build()?;
        let (src_ids, d, tag, u) = resolve_ift(&prop.ast, &prop.id, sim.registry())?;
        dest_ids = d;
        unless_c = u;
        for id in src_ids {
            let tag = tag.clone();
            let flag = exercised.clone();
            let when: Box<dyn Fn(&SignalRegistry) -> bool + Send> = Box::new(move |reg: &SignalRegistry| {
                let on = tag.as_ref().is_none_or(|t| t.holds(&reg_value(reg)));
                if on {
                    flag.store(true, Ordering::Relaxed);
                }
                on
            });
            sim.add_override(Override { target: id, value: v, when: Some(when) });
        }
        runs.push(sim);
    }
    let mut diverged = Vec::new();
    for _ in 0..plan.cycles {
        for s in runs.iter_mut() {
            s.step()?;
        }
        let (a, b) = (runs[0].registry(), runs[1].registry());
        let enabled = |reg: &SignalRegistry| !unless_c.as_ref().is_some_and(|u| u.holds(&reg_value(reg)));
        if enabled(a) && enabled(b) && dest_ids.iter().any(|&d| a.value(d) != b.value(d)) {
            diverged.push(runs[0].cycle());
        }
    }
    Ok(Differential { diverged, exercised: exercised.load(Ordering::Relaxed) })
}
