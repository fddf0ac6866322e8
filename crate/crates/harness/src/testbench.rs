// SPDX-License-Identifier: Apache-2.0

//! Testbenches the bundled property suites run on.
//!
//! The wrapper-level and firmware-level benches drive one DMA through its
//! wrapper in every mode: requests held back before configuration, legal
//! traffic, illegal reads and writes (each followed by readmission), writes
//! into the register aperture, and a reset pulse after configuration. The
//! system bench runs two wrapped controllers against three memories.

use std::collections::BTreeMap;

use acw_core::acw::{AcwConfig, Fault, Lacp, Region};
use acw_core::agents::{Descriptor, Dma, DmaMode, DmaProgram, MemoryConfig, Readmission, TeConfig};
use acw_core::axi::Dir;
use acw_core::kernel::{SimError, Simulation};
use acw_core::topology::{AcwSpec, TopologyConfig};
use acw_secprops::{eval_suite, EvalError, Level, Property, Report, RunPlan, SuiteError};
use rand::{Rng, SeedableRng};

pub const IP_REGIONS: usize = 9;
pub const FIRMWARE_REGIONS: usize = 6;
pub const SYSTEM_CYCLES: u64 = 10_000;

const MEM_BASE: u64 = 0x1000;
const MEM_SIZE: u64 = 0x100;
const UNMAPPED: u64 = 0x9000;
const APERTURE: u64 = 0xF000_0000;
const BOOT_DELAY: u64 = 20;
const GAP: u64 = 40;
const PULSE: u64 = 4;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("testbench: {0}")]
    Setup(String),
}

#[derive(Debug, Clone)]
pub struct Testbench {
    pub level: Level,
    pub topology: TopologyConfig,
    pub programs: BTreeMap<String, DmaProgram>,
    pub cycles: u64,
}

impl Testbench {
    pub fn new(level: Level, fault: Option<Fault>) -> Result<Self, BenchError> {
        match level {
            Level::Ip => single(level, IP_REGIONS, Readmission::AlwaysReadmit { after_reset: false }, fault),
            Level::Firmware => single(level, FIRMWARE_REGIONS, Readmission::AlwaysReadmit { after_reset: true }, fault),
            Level::System => Ok(system(fault, 1)),
        }
    }

    pub fn build(&self) -> Result<Simulation, SimError> {
        self.topology.build(&self.programs)
    }

    pub fn plan(&self) -> RunPlan {
        RunPlan::cycles(self.cycles)
    }

    /// Expands the bundled suite of this bench's level and checks it.
    pub fn verify(&self) -> Result<Report, BenchError> {
        let props = suite_properties(self.level)?;
        self.verify_properties(&props)
    }

    pub fn verify_properties(&self, props: &[Property]) -> Result<Report, BenchError> {
        let mut sim = self.build()?;
        let results = eval_suite(props, &mut sim, &self.plan())?;
        Ok(Report::new(results))
    }
}

pub fn suite_properties(level: Level) -> Result<Vec<Property>, SuiteError> {
    Ok(level.suite()?.expand()?.properties)
}

fn single_topology(n: usize, readmission: Readmission, fault: Option<Fault>) -> TopologyConfig {
    let own = Region::new(MEM_BASE, MEM_SIZE);
    TopologyConfig {
        controllers: vec!["c0".into()],
        acws: vec![AcwSpec {
            name: "acw0".into(),
            controller: "c0".into(),
            config: AcwConfig { n_read: n, n_write: n, fault, aperture: APERTURE, ..AcwConfig::default() },
            lacp: Lacp::new(vec![own], vec![own]),
            origin_label: false,
        }],
        peripherals: vec![MemoryConfig::new("p0", MEM_BASE, MEM_SIZE)],
        te: Some(TeConfig { readmission, boot_delay: BOOT_DELAY, ..TeConfig::default() }),
        ..TopologyConfig::default()
    }
}

fn single_program(n: usize) -> DmaProgram {
    let (rd, wr) = (Dir::Read, Dir::Write);
    // Offset of the last write-region word, unused by the policy.
    let last_region = acw_core::acw::regs::region(n, true, n - 1, 3);
    let d = vec![
        Descriptor::new(rd, MEM_BASE, 4),
        Descriptor::new(wr, MEM_BASE, 4),
        Descriptor::new(rd, UNMAPPED, 4),
        Descriptor::new(rd, MEM_BASE + 0x10, 1),
        Descriptor::new(wr, UNMAPPED, 2),
        Descriptor::new(rd, MEM_BASE + 0x20, 1),
        Descriptor::new(wr, MEM_BASE + 0x10, 2),
        Descriptor::new(wr, APERTURE + acw_core::acw::regs::ANOMALY_META, 1),
        Descriptor::new(rd, MEM_BASE, 1),
        Descriptor::new(wr, APERTURE + last_region, 1),
        Descriptor::new(rd, MEM_BASE, 1),
        Descriptor::new(rd, MEM_BASE + 0x40, 8),
        // Reset pulse lands in the gap after the previous descriptor.
        Descriptor::new(wr, MEM_BASE + 0x40, 8),
        Descriptor::new(rd, MEM_BASE + 0x40, 8),
    ];
    DmaProgram::legal(d).with_gap(GAP)
}

/// Index of the descriptor after which the mid-run reset is pulsed.
const PULSE_AFTER: usize = 11;

fn single(level: Level, n: usize, readmission: Readmission, fault: Option<Fault>) -> Result<Testbench, BenchError> {
    let mut topology = single_topology(n, readmission, None);
    let programs: BTreeMap<String, DmaProgram> = [("c0".to_string(), single_program(n))].into();

    // Dry run of the correct wrapper to place the reset pulse in an idle gap
    // and to size the run.
    let mut sim = topology.build(&programs)?;
    let mut steps = 0;
    while !sim.component::<Dma>("c0").is_some_and(Dma::finished) {
        sim.step()?;
        steps += 1;
        if steps > 50_000 {
            return Err(BenchError::Setup("dry run did not finish".into()));
        }
    }
    let dma = sim.component::<Dma>("c0").expect("controller");
    let done = dma
        .records()
        .iter()
        .filter(|r| r.descriptor == PULSE_AFTER)
        .filter_map(|r| r.done_cycle)
        .max()
        .ok_or_else(|| BenchError::Setup("pulse anchor never completed".into()))?;
    let start = done + GAP / 4;
    let cycles = sim.cycle() + 2 * (GAP + BOOT_DELAY) + 200;

    topology.reset_low = Some(vec![(0, 3), (start, start + PULSE)]);
    topology.acws[0].config.fault = fault;
    Ok(Testbench { level, topology, programs, cycles })
}

pub const SYSTEM_PERIPHERALS: [(&str, u64); 3] = [("p1", 0x1000), ("p2", 0x2000), ("p3", 0x3000)];
const SYSTEM_MEM: u64 = 0x20;

/// Two wrapped controllers and three memories. acw1 reads p1 and p2 and
/// writes p1; acw2 reads p3 and writes p2 and p3.
pub fn system_topology(fault: Option<Fault>) -> TopologyConfig {
    let p = |i: usize| Region::new(SYSTEM_PERIPHERALS[i].1, SYSTEM_MEM);
    let acw = |name: &str, c: &str, lacp: Lacp| AcwSpec {
        name: name.into(),
        controller: c.into(),
        config: AcwConfig { n_read: 2, n_write: 2, fault, ..AcwConfig::default() },
        lacp,
        origin_label: false,
    };
    TopologyConfig {
        controllers: vec!["c1".into(), "c2".into()],
        acws: vec![
            acw("acw1", "c1", Lacp::new(vec![p(0), p(1)], vec![p(0)])),
            acw("acw2", "c2", Lacp::new(vec![p(2)], vec![p(1), p(2)])),
        ],
        peripherals: SYSTEM_PERIPHERALS.iter().map(|&(n, b)| MemoryConfig::new(n, b, SYSTEM_MEM)).collect(),
        te: Some(TeConfig { boot_delay: 10, ..TeConfig::default() }),
        ..TopologyConfig::default()
    }
}

/// Seeded mix of legal requests, requests to `forbidden` and requests to
/// unmapped space, repeated until the run ends.
pub fn mixed_program(seed: u64, allowed_read: &[u64], allowed_write: &[u64], forbidden: u64) -> DmaProgram {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut d = Vec::new();
    for _ in 0..32 {
        let dir = if rng.random_bool(0.5) { Dir::Read } else { Dir::Write };
        let allowed = if dir == Dir::Read { allowed_read } else { allowed_write };
        let base = match rng.random_range(0..10) {
            0..=6 => allowed[rng.random_range(0..allowed.len())],
            7 | 8 => forbidden,
            _ => UNMAPPED,
        };
        let beats = rng.random_range(1..=4u16);
        let off = 4 * rng.random_range(0..(SYSTEM_MEM / 4 - u64::from(beats) + 1));
        d.push(Descriptor::new(dir, base + off, beats));
    }
    DmaProgram::legal(d).with_mode(DmaMode::IllegalRetry).with_gap(rng.random_range(1..6)).starting_at(5)
}

pub fn system(fault: Option<Fault>, seed: u64) -> Testbench {
    let base = |n: &str| SYSTEM_PERIPHERALS.iter().find(|p| p.0 == n).expect("peripheral").1;
    let programs = [
        ("c1".to_string(), mixed_program(seed, &[base("p1"), base("p2")], &[base("p1")], base("p3"))),
        ("c2".to_string(), mixed_program(seed.wrapping_add(1), &[base("p3")], &[base("p2"), base("p3")], base("p1"))),
    ]
    .into();
    Testbench { level: Level::System, topology: system_topology(fault), programs, cycles: SYSTEM_CYCLES }
}
