// SPDX-License-Identifier: Apache-2.0

//! Cycle-by-cycle conformance checks on every wrapper of a running system:
//! interrupt lines mirror Decouple mode, registers hold their defaults
//! while reset is asserted, and a decoupled direction only drains the
//! legal transactions it already had in flight.

use acw_core::acw::{regs, Acw, Mode};
use acw_core::axi::{Dir, Resp};
use acw_core::kernel::{SimError, Simulation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsmViolation {
    pub cycle: u64,
    pub acw: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default)]
struct Prev {
    state: [Option<Mode>; 2],
    outstanding: [u32; 2],
}

#[derive(Debug)]
pub struct FsmMonitor {
    acws: Vec<String>,
    prev: Vec<Prev>,
    pub violations: Vec<FsmViolation>,
    pub cycles: u64,
}

fn dir_index(d: Dir) -> usize {
    match d {
        Dir::Read => 0,
        Dir::Write => 1,
    }
}

impl FsmMonitor {
    pub fn new(acws: impl IntoIterator<Item = String>) -> Self {
        let acws: Vec<String> = acws.into_iter().collect();
        Self { prev: vec![Prev::default(); acws.len()], acws, violations: Vec::new(), cycles: 0 }
    }

    /// Checks the state reached by the last step.
    pub fn check(&mut self, sim: &Simulation) -> Result<(), SimError> {
        let cycle = sim.cycle();
        let in_reset = sim.value("ARESETN")? == 0;
        self.cycles += 1;
        for (k, name) in self.acws.iter().enumerate() {
            let acw =
                sim.component::<Acw>(name).ok_or_else(|| SimError::Config(format!("monitor: no wrapper `{name}`")))?;
            let st = acw.state();
            let mut bad = |m: String| self.violations.push(FsmViolation { cycle, acw: name.clone(), message: m });
            for (dir, sig) in [(Dir::Read, "intr_r"), (Dir::Write, "intr_w")] {
                let intr = sim.value(&format!("{name}.{sig}"))? == 1;
                if intr != (st.state(dir) == Mode::Decouple) {
                    bad(format!("{sig}={} in {:?}", u8::from(intr), st.state(dir)));
                }
            }
            if in_reset {
                for (w, r) in st.regs.iter().enumerate() {
                    if 4 * w as u64 != regs::STATUS && r.v != 0 {
                        bad(format!("register {:#x} = {:#x} during reset", 4 * w, r.v));
                    }
                }
                if st.r_state != Mode::Reset || st.w_state != Mode::Reset {
                    bad("mode left Reset during reset".into());
                }
            }
            let p = &mut self.prev[k];
            for dir in [Dir::Read, Dir::Write] {
                let i = dir_index(dir);
                let n = match dir {
                    Dir::Read => st.outstanding_r,
                    Dir::Write => st.outstanding_w,
                };
                if st.state(dir) == Mode::Decouple && p.state[i] == Some(Mode::Decouple) && n > p.outstanding[i] {
                    bad(format!("{dir:?} outstanding grew from {} to {n} while decoupled", p.outstanding[i]));
                }
                p.state[i] = Some(st.state(dir));
                p.outstanding[i] = n;
            }
            // The error burst for an illegal read waits for earlier legal reads.
            let r_valid = sim.value(&format!("{name}.m.RVALID"))? == 1;
            let r_err = sim.value(&format!("{name}.m.RRESP"))? == Resp::SlvErr.encode();
            if r_valid && r_err && st.r_state == Mode::Decouple && st.outstanding_r > 0 {
                bad(format!("error beat with {} legal reads outstanding", st.outstanding_r));
            }
        }
        Ok(())
    }

    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Steps `sim` for `cycles` cycles under a monitor for `acws`.
pub fn run_monitored(sim: &mut Simulation, acws: &[String], cycles: u64) -> Result<FsmMonitor, SimError> {
    let mut m = FsmMonitor::new(acws.iter().cloned());
    for _ in 0..cycles {
        sim.step()?;
        m.check(sim)?;
    }
    Ok(m)
}
