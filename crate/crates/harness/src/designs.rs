// SPDX-License-Identifier: Apache-2.0

//! The three access-control designs and the experiments run on them.
//!
//! Three controllers share one DRAM controller. Each controller owns a
//! private region; region F is forbidden to everyone.
//!
//! * (a) static connectivity matrix in the interconnect: rejected requests
//!   are answered at the manager port and never reach the DRAM.
//! * (b) filter in front of the DRAM: requests carry no source identity
//!   there, and rejected requests occupy the DRAM port until the error
//!   response has been produced.
//! * (c) one wrapper per controller plus the trusted entity.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use acw_core::acw::{AcwConfig, Lacp, Region};
use acw_core::agents::{Descriptor, DmaMode, DmaProgram, MemoryConfig, Readmission, TeConfig};
use acw_core::axi::Dir;
use acw_core::fabric::{FilterMode, ForbiddenRule, MatrixSegment};
use acw_core::topology::{AcwSpec, FabricSpec, TopologyConfig};
use serde::{Deserialize, Serialize};

use crate::scenario::{Probe, ScenarioConfig};

pub const DDR: &str = "ddr";
pub const DDR_BASE: u64 = 0x8000_0000;
pub const DDR_SIZE: u64 = 0x0100_0000;
pub const REGION_SIZE: u64 = 0x0040_0000;
pub const DDR_READ_LATENCY: u64 = 48;
pub const DDR_WRITE_LATENCY: u64 = 24;
/// Cycles the DRAM-side filter spends on a rejected request before the
/// first error beat, matching the pipeline depth of a legal access.
pub const FILTER_ERROR_OVERHEAD: u32 = DDR_READ_LATENCY as u32;

pub const CONTROLLERS: [&str; 3] = ["c1", "c2", "c3"];

/// Base of controller `i`'s private region (0-based); index 3 is F.
pub fn region_base(i: usize) -> u64 {
    DDR_BASE + REGION_SIZE * i as u64
}

pub fn forbidden() -> Region {
    Region::new(region_base(3), REGION_SIZE)
}

/// Probe sizes in beats: single bursts of 16 and 256 beats, then trains
/// of 256-beat bursts standing in for multi-kilobyte transfers.
pub const PROBE_BEATS: [u64; 4] = [16, 256, 4 * 256, 16 * 256];

/// Cycle at which controllers start; late enough for the trusted entity to
/// finish configuring every wrapper with 16 regions per direction.
pub const START_CYCLE: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Design {
    A,
    B,
    C,
}

impl Design {
    pub const ALL: [Design; 3] = [Design::A, Design::B, Design::C];

    pub fn label(self) -> &'static str {
        match self {
            Design::A => "a",
            Design::B => "b",
            Design::C => "c",
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Design {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Design::A),
            "b" => Ok(Design::B),
            "c" => Ok(Design::C),
            _ => Err(format!("unknown design `{s}` (expected a, b or c)")),
        }
    }
}

/// The shared-DRAM system under `design`, with `n_regions` region slots
/// per direction in every wrapper of design (c).
pub fn topology(design: Design, n_regions: usize) -> TopologyConfig {
    let own = |i: usize| Region::new(region_base(i), REGION_SIZE);
    let mut fabric = FabricSpec::default();
    let mut acws = Vec::new();
    let mut te = None;
    match design {
        Design::A => {
            let mut segments: Vec<MatrixSegment> = CONTROLLERS
                .iter()
                .enumerate()
                .map(|(i, c)| MatrixSegment {
                    name: format!("{c}_private"),
                    base: region_base(i),
                    size: REGION_SIZE,
                    read: vec![c.to_string()],
                    write: vec![c.to_string()],
                })
                .collect();
            let f = forbidden();
            segments.push(MatrixSegment { name: "f".into(), base: f.base, size: f.size, read: vec![], write: vec![] });
            fabric.filter = FilterMode::StaticMatrix { segments };
        }
        Design::B => {
            let f = forbidden();
            fabric.filter = FilterMode::PeripheralFilter {
                rules: vec![ForbiddenRule { peripheral: DDR.into(), base: f.base, size: f.size, controller: None }],
                error_overhead: FILTER_ERROR_OVERHEAD,
            };
        }
        Design::C => {
            for (i, c) in CONTROLLERS.iter().enumerate() {
                acws.push(AcwSpec {
                    name: format!("acw{}", i + 1),
                    controller: c.to_string(),
                    config: AcwConfig { n_read: n_regions, n_write: n_regions, ..AcwConfig::default() },
                    lacp: Lacp::new(vec![own(i)], vec![own(i)]),
                    origin_label: false,
                });
            }
            te =
                Some(TeConfig { readmission: Readmission::AlwaysReadmit { after_reset: true }, ..TeConfig::default() });
        }
    }
    TopologyConfig {
        controllers: CONTROLLERS.iter().map(|s| s.to_string()).collect(),
        acws,
        fabric,
        peripherals: vec![MemoryConfig::new(DDR, DDR_BASE, DDR_SIZE).with_latency(DDR_READ_LATENCY, DDR_WRITE_LATENCY)],
        te,
        taint: Vec::new(),
        reset_low: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Isolation,
    Interference,
    Dos,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Isolation, Experiment::Interference, Experiment::Dos];

    pub fn label(self) -> &'static str {
        match self {
            Experiment::Isolation => "isolation",
            Experiment::Interference => "interference",
            Experiment::Dos => "dos",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.label() == s)
            .ok_or_else(|| format!("unknown experiment `{s}` (expected isolation, interference or dos)"))
    }
}

/// Legal read program covering every probe size, `reps` times each.
pub fn probe_program(controller: usize, reps: u32) -> DmaProgram {
    let base = region_base(controller);
    let mut d = Vec::new();
    for &beats in &PROBE_BEATS {
        if beats <= 256 {
            d.push(Descriptor::new(Dir::Read, base, beats as u16).repeat(reps));
        } else {
            for _ in 0..reps {
                d.push(Descriptor::new(Dir::Read, base, 256).repeat((beats / 256) as u32).train());
            }
        }
    }
    DmaProgram::legal(d).with_outstanding(2).starting_at(START_CYCLE)
}

/// Beats of each illegal burst issued against F.
pub const ATTACK_BEATS: u16 = 256;

/// Illegal reads of F, retried one at a time or flooded.
pub fn attacker_program(mode: DmaMode) -> DmaProgram {
    DmaProgram::legal(vec![Descriptor::new(Dir::Read, forbidden().base, ATTACK_BEATS)])
        .with_mode(mode)
        .starting_at(START_CYCLE)
}

fn scenario(
    design: Design,
    n_regions: usize,
    programs: BTreeMap<String, DmaProgram>,
    probes: Vec<Probe>,
) -> ScenarioConfig {
    ScenarioConfig {
        topology: topology(design, n_regions),
        programs,
        probes,
        budget: 2_000_000,
        seed: 1,
        watch: Vec::new(),
        jitter: 0,
    }
}

/// Scenarios of one experiment on one design. Isolation runs each
/// controller alone; the others run C1's probes against C2's attack.
pub fn scenarios(exp: Experiment, design: Design, reps: u32) -> Vec<ScenarioConfig> {
    let probes = |c: &str| PROBE_BEATS.iter().map(|&b| Probe::new(c, b)).collect::<Vec<_>>();
    match exp {
        Experiment::Isolation => CONTROLLERS
            .iter()
            .enumerate()
            .map(|(i, c)| scenario(design, 4, [(c.to_string(), probe_program(i, reps))].into(), probes(c)))
            .collect(),
        Experiment::Interference | Experiment::Dos => {
            let mode = if exp == Experiment::Dos { DmaMode::Flood } else { DmaMode::IllegalRetry };
            let progs = [("c1".to_string(), probe_program(0, reps)), ("c2".to_string(), attacker_program(mode))].into();
            vec![scenario(design, 4, progs, probes("c1"))]
        }
    }
}
