// SPDX-License-Identifier: Apache-2.0

//! Cycle-based simulation kernel.
//!
//! Every cycle runs in two phases. `tick` reads the committed values of the
//! previous cycle and writes registered outputs; `settle` then derives
//! combinational outputs from registered values only. Writes go to a pending
//! log and are applied at the end of each phase, so component order never
//! changes the result.

mod signal;
mod sim;
mod taint;
mod trace;

use std::any::Any;

pub use signal::{mask, ResetDomain, SignalId, SignalKind, SignalMeta, SignalRegistry, Tv};
pub use sim::{
    Channel, CycleEvents, Injector, Override, Predicate, ResetSchedule, Simulation, StopCondition, Violation,
    PREDICATE_CAP, RESET_SIGNAL,
};
pub use taint::{union_all, TaintId, TaintNames, TaintSet};
pub use trace::Trace;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("signal `{0}` registered twice")]
    DuplicateSignal(String),
    #[error("signal `{name}` has unsupported width {width}")]
    BadWidth { name: String, width: u8 },
    #[error("duplicate component name `{0}`")]
    DuplicateComponent(String),
    #[error("cycle bound must be positive")]
    ZeroBound,
    #[error("stop predicate never held within {0} cycles")]
    PredicateCap(u64),
    #[error("protocol violation at cycle {cycle}: {message}")]
    Protocol { cycle: u64, message: String },
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Tick,
    Settle,
}

/// Per-phase view handed to components.
pub struct Cx<'a> {
    pub(crate) reg: &'a SignalRegistry,
    pub(crate) pending: &'a mut Vec<(SignalId, u64, TaintSet)>,
    pub(crate) violations: &'a mut Vec<String>,
    pub(crate) cycle: u64,
    pub(crate) reset: bool,
    pub(crate) phase: Phase,
}

impl Cx<'_> {
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// True while `ARESETN` is low in the cycle being computed.
    pub fn in_reset(&self) -> bool {
        self.reset
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn registry(&self) -> &SignalRegistry {
        self.reg
    }

    #[inline]
    fn check_read(&self, id: SignalId) {
        debug_assert!(
            self.phase == Phase::Tick || self.reg.meta(id).kind != SignalKind::Comb,
            "settle read of combinational signal `{}`",
            self.reg.name(id)
        );
    }

    pub fn val(&self, id: SignalId) -> u64 {
        self.check_read(id);
        self.reg.value(id)
    }

    pub fn bit(&self, id: SignalId) -> bool {
        self.val(id) != 0
    }

    pub fn taint(&self, id: SignalId) -> &TaintSet {
        self.check_read(id);
        self.reg.taint(id)
    }

    pub fn get(&self, id: SignalId) -> Tv {
        self.check_read(id);
        self.reg.get(id)
    }

    pub fn set(&mut self, id: SignalId, v: u64, t: TaintSet) {
        debug_assert!(
            match self.phase {
                Phase::Tick => self.reg.meta(id).kind == SignalKind::Registered,
                Phase::Settle => self.reg.meta(id).kind == SignalKind::Comb,
            },
            "`{}` written in the wrong phase",
            self.reg.name(id)
        );
        self.pending.push((id, v, t));
    }

    pub fn set_tv(&mut self, id: SignalId, tv: Tv) {
        self.set(id, tv.v, tv.t);
    }

    pub fn set_clean(&mut self, id: SignalId, v: u64) {
        self.set(id, v, TaintSet::new());
    }

    /// Writes the declared default with no taint.
    pub fn clear(&mut self, id: SignalId) {
        let d = self.reg.meta(id).default;
        self.set(id, d, TaintSet::new());
    }

    pub fn violation(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }
}

/// A clocked model stepped by the kernel.
pub trait Component: Any {
    fn name(&self) -> &str;

    /// Resolves input signal names once every component has registered its
    /// outputs.
    fn bind(&mut self, _reg: &SignalRegistry) -> Result<(), SimError> {
        Ok(())
    }

    fn tick(&mut self, cx: &mut Cx<'_>);

    fn settle(&mut self, _cx: &mut Cx<'_>) {}

    fn as_any(&self) -> &dyn Any;

    fn as_any_mut(&mut self) -> &mut dyn Any;
}

/// Shorthand used by components to register their outputs.
pub fn register(
    reg: &mut SignalRegistry,
    owner: usize,
    name: impl Into<String>,
    width: u8,
    kind: SignalKind,
    domain: ResetDomain,
) -> Result<SignalId, SimError> {
    reg.register(SignalMeta { name: name.into(), width, kind, default: 0, domain, owner })
}
