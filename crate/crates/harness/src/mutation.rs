// SPDX-License-Identifier: Apache-2.0

//! Behavioral faults injected into the wrapper to check that the bundled
//! suites notice them.

use acw_core::acw::Fault;
use acw_secprops::{Level, Report};
use serde::Serialize;

use crate::testbench::{BenchError, Testbench};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Mutant {
    pub id: &'static str,
    pub description: &'static str,
    #[serde(skip)]
    pub fault: Fault,
}

pub const MUTANTS: [Mutant; 6] = [
    Mutant {
        id: "skip-region-check",
        description: "every request is forwarded without checking the policy",
        fault: Fault::SkipRegionCheck,
    },
    Mutant {
        id: "no-reset-clear",
        description: "reset leaves the configuration and anomaly registers untouched",
        fault: Fault::NoResetClear,
    },
    Mutant {
        id: "forward-in-reset",
        description: "requests pass through during reset and in Reset mode",
        fault: Fault::ForwardInReset,
    },
    Mutant { id: "no-interrupt", description: "interrupt lines are never raised", fault: Fault::NoInterrupt },
    Mutant {
        id: "anomaly-writable",
        description: "the controller can write the anomaly registers through an aperture",
        fault: Fault::AnomalyWritableByController,
    },
    Mutant {
        id: "config-writable",
        description: "the controller can write the configuration registers through an aperture",
        fault: Fault::ConfigWritableByController,
    },
];

pub fn mutant(id: &str) -> Option<Mutant> {
    MUTANTS.into_iter().find(|m| m.id == id)
}

/// Runs `level`'s suite against the wrapper with `mutant`'s fault, or the
/// correct wrapper when `mutant` is `None`.
pub fn run_mutation(level: Level, mutant: Option<&Mutant>) -> Result<Report, BenchError> {
    Testbench::new(level, mutant.map(|m| m.fault))?.verify()
}
