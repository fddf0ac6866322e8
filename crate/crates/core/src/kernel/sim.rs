// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;

use super::signal::{ResetDomain, SignalId, SignalKind, SignalMeta, SignalRegistry};
use super::taint::{TaintId, TaintNames, TaintSet};
use super::trace::Trace;
use super::{Component, Cx, Phase, SimError};

pub const RESET_SIGNAL: &str = "ARESETN";

/// Upper bound on cycles for runs that stop only on a predicate.
pub const PREDICATE_CAP: u64 = 10_000_000;

/// Cycles during which `ARESETN` is driven low, as half-open ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResetSchedule {
    pub low: Vec<(u64, u64)>,
}

impl Default for ResetSchedule {
    fn default() -> Self {
        Self { low: vec![(0, 3)] }
    }
}

impl ResetSchedule {
    pub fn none() -> Self {
        Self { low: Vec::new() }
    }

    pub fn pulse(mut self, start: u64, cycles: u64) -> Self {
        self.low.push((start, start + cycles));
        self
    }

    pub fn is_low(&self, cycle: u64) -> bool {
        self.low.iter().any(|&(a, b)| cycle >= a && cycle < b)
    }
}

/// A valid/ready pair watched by the kernel.
#[derive(Debug, Clone)]
pub struct Channel {
    pub name: String,
    pub valid: SignalId,
    pub ready: SignalId,
    pub payload: Vec<SignalId>,
    /// Extra reset line (active high) excusing stability violations.
    pub reset: Option<SignalId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub cycle: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CycleEvents {
    pub cycle: u64,
    /// Names of channels that completed a handshake this cycle.
    pub handshakes: Vec<String>,
    pub violations: Vec<Violation>,
}

pub type Predicate = Box<dyn Fn(&SignalRegistry) -> bool + Send>;

/// Adds `label` to each target while `when` holds (always, if absent).
pub struct Injector {
    pub label: TaintId,
    pub targets: Vec<SignalId>,
    pub when: Option<Predicate>,
}

impl std::fmt::Debug for Injector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Injector")
            .field("label", &self.label)
            .field("targets", &self.targets)
            .field("conditional", &self.when.is_some())
            .finish()
    }
}

/// Replaces the value of `target` with `value` while `when` holds. Taint is
/// left alone. Used to compare runs that differ only in one signal.
pub struct Override {
    pub target: SignalId,
    pub value: u64,
    pub when: Option<Predicate>,
}

impl std::fmt::Debug for Override {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Override")
            .field("target", &self.target)
            .field("value", &self.value)
            .field("conditional", &self.when.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopCondition {
    pub bound: Option<u64>,
    pub until: Option<(String, u64)>,
}

impl StopCondition {
    pub fn cycles(n: u64) -> Self {
        Self { bound: Some(n), until: None }
    }

    pub fn until(name: impl Into<String>, value: u64) -> Self {
        Self { bound: None, until: Some((name.into(), value)) }
    }

    pub fn or_within(mut self, n: u64) -> Self {
        self.bound = Some(n);
        self
    }
}

pub struct Simulation {
    cycle: u64,
    reg: SignalRegistry,
    comps: Vec<Box<dyn Component>>,
    aresetn: SignalId,
    resets: ResetSchedule,
    names: TaintNames,
    injectors: Vec<Injector>,
    overrides: Vec<Override>,
    channels: Vec<Channel>,
    stalled: Vec<Option<Vec<u64>>>,
    pending: Vec<(SignalId, u64, TaintSet)>,
    violations: Vec<String>,
    watch: Option<Vec<SignalId>>,
    strict: bool,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("cycle", &self.cycle)
            .field("signals", &self.reg.len())
            .field("components", &self.component_names())
            .finish()
    }
}

impl Simulation {
    /// Starts a registry holding only the reset line.
    pub fn registry_with_reset() -> SignalRegistry {
        let mut reg = SignalRegistry::new();
        reg.register(SignalMeta {
            name: RESET_SIGNAL.into(),
            width: 1,
            kind: SignalKind::Input,
            default: 0,
            domain: ResetDomain::System,
            owner: usize::MAX,
        })
        .expect("fresh registry");
        reg
    }

    pub fn new(
        mut reg: SignalRegistry,
        mut comps: Vec<Box<dyn Component>>,
        resets: ResetSchedule,
    ) -> Result<Self, SimError> {
        let aresetn = reg.id(RESET_SIGNAL)?;
        let mut seen = HashSet::new();
        for c in &comps {
            if !seen.insert(c.name().to_string()) {
                return Err(SimError::DuplicateComponent(c.name().to_string()));
            }
        }
        for c in comps.iter_mut() {
            c.bind(&reg)?;
        }
        reg.force_value(aresetn, u64::from(!resets.is_low(0)));
        Ok(Self {
            cycle: 0,
            reg,
            comps,
            aresetn,
            resets,
            names: TaintNames::default(),
            injectors: Vec::new(),
            overrides: Vec::new(),
            channels: Vec::new(),
            stalled: Vec::new(),
            pending: Vec::new(),
            violations: Vec::new(),
            watch: None,
            strict: false,
        })
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn registry(&self) -> &SignalRegistry {
        &self.reg
    }

    pub fn taint_names(&self) -> &TaintNames {
        &self.names
    }

    pub fn declare_taint(&mut self, name: impl Into<String>) -> TaintId {
        self.names.declare(name)
    }

    pub fn add_injector(&mut self, inj: Injector) {
        self.injectors.push(inj);
    }

    pub fn add_override(&mut self, o: Override) {
        self.overrides.push(o);
    }

    pub fn add_channel(&mut self, ch: Channel) {
        self.channels.push(ch);
        self.stalled.push(None);
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn set_strict(&mut self, strict: bool) {
        self.strict = strict;
    }

    pub fn set_reset_schedule(&mut self, s: ResetSchedule) {
        self.resets = s;
    }

    pub fn reset_schedule(&self) -> &ResetSchedule {
        &self.resets
    }

    pub fn set_watch(&mut self, names: &[&str]) -> Result<(), SimError> {
        let ids = names.iter().map(|n| self.reg.id(n)).collect::<Result<Vec<_>, _>>()?;
        self.watch = Some(ids);
        Ok(())
    }

    pub fn set_watch_ids(&mut self, ids: Vec<SignalId>) {
        self.watch = Some(ids);
    }

    pub fn read_signal(&self, name: &str) -> Result<(u64, TaintSet), SimError> {
        self.reg.read(name)
    }

    pub fn value(&self, name: &str) -> Result<u64, SimError> {
        Ok(self.reg.value(self.reg.id(name)?))
    }

    pub fn component_names(&self) -> Vec<&str> {
        self.comps.iter().map(|c| c.name()).collect()
    }

    pub fn component<T: 'static>(&self, name: &str) -> Option<&T> {
        self.comps.iter().find(|c| c.name() == name)?.as_any().downcast_ref()
    }

    pub fn component_mut<T: 'static>(&mut self, name: &str) -> Option<&mut T> {
        self.comps.iter_mut().find(|c| c.name() == name)?.as_any_mut().downcast_mut()
    }

    fn apply(&mut self) {
        for (id, v, t) in self.pending.drain(..) {
            self.reg.set(id, v, t);
        }
    }

    fn run_phase(&mut self, phase: Phase) {
        let reset = self.reg.value(self.aresetn) == 0;
        for c in self.comps.iter_mut() {
            let mut cx = Cx {
                reg: &self.reg,
                pending: &mut self.pending,
                violations: &mut self.violations,
                cycle: self.cycle,
                reset,
                phase,
            };
            match phase {
                Phase::Tick => c.tick(&mut cx),
                Phase::Settle => c.settle(&mut cx),
            }
        }
        self.apply();
    }

    fn inject(&mut self, comb: bool) {
        let mut adds: Vec<(SignalId, TaintId)> = Vec::new();
        for inj in &self.injectors {
            if inj.when.as_ref().is_some_and(|p| !p(&self.reg)) {
                continue;
            }
            for &t in &inj.targets {
                if (self.reg.meta(t).kind == SignalKind::Comb) == comb {
                    adds.push((t, inj.label));
                }
            }
        }
        for (t, l) in adds {
            self.reg.add_taint(t, &TaintSet::single(l));
        }
        let mut forced = Vec::new();
        for o in &self.overrides {
            let is_comb = self.reg.meta(o.target).kind == SignalKind::Comb;
            if is_comb == comb && o.when.as_ref().is_none_or(|p| p(&self.reg)) {
                forced.push((o.target, o.value));
            }
        }
        for (t, v) in forced {
            self.reg.force_value(t, v);
        }
    }

    fn observe_channels(&mut self, ev: &mut CycleEvents) {
        let reset_low = self.reg.value(self.aresetn) == 0;
        for (i, ch) in self.channels.iter().enumerate() {
            let valid = self.reg.value(ch.valid) != 0;
            let ready = self.reg.value(ch.ready) != 0;
            let excused = reset_low || ch.reset.is_some_and(|r| self.reg.value(r) != 0);
            if let Some(prev) = self.stalled[i].take() {
                if !excused {
                    if !valid {
                        ev.violations.push(Violation {
                            cycle: self.cycle,
                            message: format!("{}: valid dropped before ready", ch.name),
                        });
                    } else {
                        let now: Vec<u64> = ch.payload.iter().map(|&p| self.reg.value(p)).collect();
                        if now != prev {
                            ev.violations.push(Violation {
                                cycle: self.cycle,
                                message: format!("{}: payload changed while stalled", ch.name),
                            });
                        }
                    }
                }
            }
            if valid && ready {
                ev.handshakes.push(ch.name.clone());
            } else if valid && !excused {
                self.stalled[i] = Some(ch.payload.iter().map(|&p| self.reg.value(p)).collect());
            }
        }
    }

    /// Advances one clock cycle.
    pub fn step(&mut self) -> Result<CycleEvents, SimError> {
        self.cycle += 1;
        let rst = u64::from(!self.resets.is_low(self.cycle));
        self.reg.set(self.aresetn, rst, TaintSet::new());

        self.run_phase(Phase::Tick);
        self.inject(false);
        self.run_phase(Phase::Settle);
        self.inject(true);

        let mut ev = CycleEvents { cycle: self.cycle, ..Default::default() };
        for m in self.violations.drain(..) {
            ev.violations.push(Violation { cycle: self.cycle, message: m });
        }
        self.observe_channels(&mut ev);
        if self.strict {
            if let Some(v) = ev.violations.first() {
                return Err(SimError::Protocol { cycle: v.cycle, message: v.message.clone() });
            }
        }
        Ok(ev)
    }

    pub fn step_n(&mut self, n: u64) -> Result<(), SimError> {
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    fn watch_ids(&self) -> Vec<SignalId> {
        self.watch.clone().unwrap_or_else(|| self.reg.ids().collect())
    }

    pub fn new_trace(&self) -> Trace {
        let ids = self.watch_ids();
        Trace::new(ids.iter().map(|&i| self.reg.name(i).to_string()).collect(), ids)
    }

    /// Steps until `stop` is met, sampling the watch-list after every cycle.
    pub fn run(&mut self, stop: &StopCondition) -> Result<Trace, SimError> {
        if stop.bound == Some(0) {
            return Err(SimError::ZeroBound);
        }
        if stop.bound.is_none() && stop.until.is_none() {
            return Err(SimError::Config("stop condition needs a bound or a predicate".into()));
        }
        let until = match &stop.until {
            Some((n, v)) => Some((self.reg.id(n)?, *v)),
            None => None,
        };
        let mut trace = self.new_trace();
        let cap = stop.bound.unwrap_or(PREDICATE_CAP);
        for _ in 0..cap {
            self.step()?;
            trace.sample(self.cycle, &self.reg);
            if let Some((id, v)) = until {
                if self.reg.value(id) == v {
                    return Ok(trace);
                }
            }
        }
        if stop.bound.is_none() {
            return Err(SimError::PredicateCap(cap));
        }
        Ok(trace)
    }
}
