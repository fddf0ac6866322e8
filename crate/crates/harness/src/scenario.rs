// SPDX-License-Identifier: Apache-2.0

//! Scenario files and response-time metrics.

use std::collections::BTreeMap;
use std::io::Write;

use acw_core::agents::{Dma, DmaProgram, TxnRecord};
use acw_core::axi::Resp;
use acw_core::kernel::{SimError, Simulation, Trace};
use acw_core::topology::TopologyConfig;
use serde::{Deserialize, Serialize};

use crate::monitor::FsmMonitor;

/// A response-time probe: transactions (or trains) of `txn_beats` total
/// beats issued by `controller`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub controller: String,
    pub txn_beats: u64,
    #[serde(default)]
    pub name: Option<String>,
}

impl Probe {
    pub fn new(controller: &str, txn_beats: u64) -> Self {
        Self { controller: controller.into(), txn_beats, name: None }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{}/{}", self.controller, self.txn_beats))
    }
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub topology: TopologyConfig,
    #[serde(default)]
    pub programs: BTreeMap<String, DmaProgram>,
    #[serde(default)]
    pub probes: Vec<Probe>,
    pub budget: u64,
    #[serde(default = "one")]
    pub seed: u64,
    /// Signals to record for waveform export.
    #[serde(default)]
    pub watch: Vec<String>,
    /// Upper bound of the random delay added before each controller starts.
    #[serde(default)]
    pub jitter: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario: {0}")]
    Schema(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("scenario file: {0}")]
    Json(#[from] serde_json::Error),
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.budget == 0 {
            return Err(ScenarioError::Schema("budget must be positive".into()));
        }
        for p in &self.probes {
            if !self.topology.controllers.contains(&p.controller) {
                return Err(ScenarioError::Schema(format!("probe on undeclared controller `{}`", p.controller)));
            }
            if p.txn_beats == 0 {
                return Err(ScenarioError::Schema("probe size must be positive".into()));
            }
        }
        Ok(())
    }

    /// Programs with the seeded start jitter applied.
    pub fn effective_programs(&self) -> BTreeMap<String, DmaProgram> {
        let mut progs = self.programs.clone();
        if self.jitter > 0 {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
            for p in progs.values_mut() {
                p.start_cycle += rng.random_range(0..=self.jitter);
            }
        }
        progs
    }

    pub fn build(&self) -> Result<Simulation, ScenarioError> {
        self.validate()?;
        let mut sim = self.topology.build(&self.effective_programs())?;
        if !self.watch.is_empty() {
            let names: Vec<&str> = self.watch.iter().map(String::as_str).collect();
            sim.set_watch(&names)?;
        }
        Ok(sim)
    }
}

/// One measured transaction or train.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub controller: String,
    pub group: u64,
    pub txn_beats: u64,
    pub accept_cycle: u64,
    pub done_cycle: u64,
    pub cycles: u64,
    pub ok: bool,
}

/// Completed groups of a controller. A group is one transaction, or all
/// bursts of one train.
pub fn samples(controller: &str, records: &[TxnRecord]) -> Vec<Sample> {
    let mut groups: BTreeMap<u64, Vec<&TxnRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.group).or_default().push(r);
    }
    let mut out = Vec::new();
    for (g, rs) in groups {
        if rs.iter().any(|r| r.abandoned || r.done_cycle.is_none()) {
            continue;
        }
        let accept = rs.iter().map(|r| r.accept_cycle).min().expect("non-empty");
        let done = rs.iter().filter_map(|r| r.done_cycle).max().expect("non-empty");
        out.push(Sample {
            controller: controller.into(),
            group: g,
            txn_beats: rs.iter().map(|r| u64::from(r.beats)).sum(),
            accept_cycle: accept,
            done_cycle: done,
            cycles: done - accept + 1,
            ok: rs.iter().all(|r| r.resp == Resp::Okay),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetrics {
    pub probe: String,
    pub controller: String,
    pub txn_beats: u64,
    pub mean_cycles: f64,
    pub min_cycles: u64,
    pub max_cycles: u64,
    pub count: usize,
}

impl ProbeMetrics {
    pub fn from_samples(probe: &Probe, samples: &[Sample]) -> Self {
        let xs: Vec<u64> = samples
            .iter()
            .filter(|s| s.controller == probe.controller && s.txn_beats == probe.txn_beats)
            .map(|s| s.cycles)
            .collect();
        let mean = if xs.is_empty() { f64::NAN } else { xs.iter().sum::<u64>() as f64 / xs.len() as f64 };
        Self {
            probe: probe.label(),
            controller: probe.controller.clone(),
            txn_beats: probe.txn_beats,
            mean_cycles: mean,
            min_cycles: xs.iter().copied().min().unwrap_or(0),
            max_cycles: xs.iter().copied().max().unwrap_or(0),
            count: xs.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub probes: Vec<ProbeMetrics>,
    pub samples: Vec<Sample>,
    pub cycles: u64,
    /// False when the budget ran out before every legal program finished.
    pub complete: bool,
    /// Protocol checker findings.
    pub violations: usize,
    /// Wrapper mode-machine findings, see [`crate::monitor`].
    pub fsm_violations: usize,
}

impl MetricsReport {
    pub fn probe(&self, controller: &str, txn_beats: u64) -> Option<&ProbeMetrics> {
        self.probes.iter().find(|p| p.controller == controller && p.txn_beats == txn_beats)
    }

    /// Raw per-transaction latencies.
    pub fn write_raw_csv<W: Write>(&self, out: W, design: &str) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["controller", "design", "group", "txn_beats", "accept_cycle", "done_cycle", "cycles", "ok"])?;
        for s in &self.samples {
            w.write_record([
                s.controller.clone(),
                design.to_string(),
                s.group.to_string(),
                s.txn_beats.to_string(),
                s.accept_cycle.to_string(),
                s.done_cycle.to_string(),
                s.cycles.to_string(),
                s.ok.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs until every legal program is done or the budget is spent.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsReport, ScenarioError> {
    let mut sim = cfg.build()?;
    run_built(cfg, &mut sim, None)
}

/// Like [`run_scenario`], also sampling the watch-list every cycle.
pub fn run_traced(cfg: &ScenarioConfig) -> Result<(MetricsReport, Trace), ScenarioError> {
    let mut sim = cfg.build()?;
    let ids = cfg.watch.iter().map(|n| sim.registry().id(n)).collect::<Result<Vec<_>, _>>()?;
    let mut trace = Trace::new(cfg.watch.clone(), ids);
    let r = run_built(cfg, &mut sim, Some(&mut trace))?;
    Ok((r, trace))
}

pub fn run_built(
    cfg: &ScenarioConfig,
    sim: &mut Simulation,
    mut trace: Option<&mut Trace>,
) -> Result<MetricsReport, ScenarioError> {
    let legal: Vec<&String> =
        cfg.programs.iter().filter(|(_, p)| p.mode == acw_core::agents::DmaMode::Legal).map(|(c, _)| c).collect();
    let mut violations = 0;
    let mut complete = false;
    let mut monitor = FsmMonitor::new(cfg.topology.acws.iter().map(|a| a.name.clone()));
    for _ in 0..cfg.budget {
        violations += sim.step()?.violations.len();
        monitor.check(sim)?;
        if let Some(t) = trace.as_deref_mut() {
            t.sample(sim.cycle(), sim.registry());
        }
        if legal.iter().all(|c| sim.component::<Dma>(c).is_some_and(Dma::finished)) {
            complete = true;
            break;
        }
    }
    let mut all = Vec::new();
    for c in &cfg.topology.controllers {
        if let Some(d) = sim.component::<Dma>(c) {
            all.extend(samples(c, d.records()));
        }
    }
    let probes = cfg.probes.iter().map(|p| ProbeMetrics::from_samples(p, &all)).collect();
    Ok(MetricsReport {
        probes,
        samples: all,
        cycles: sim.cycle(),
        complete,
        violations,
        fsm_violations: monitor.violations.len(),
    })
}

/// Header of the metrics CSV.
pub const CSV_HEADER: [&str; 7] = ["probe", "design", "txn_beats", "mean_cycles", "min_cycles", "max_cycles", "count"];

pub fn write_metrics_csv<W: Write>(out: W, rows: &[(String, ProbeMetrics)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (design, m) in rows {
        w.write_record([
            m.probe.clone(),
            design.clone(),
            m.txn_beats.to_string(),
            format!("{:.3}", m.mean_cycles),
            m.min_cycles.to_string(),
            m.max_cycles.to_string(),
            m.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Row of a metrics CSV as read back by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub probe: String,
    pub design: String,
    pub txn_beats: u64,
    pub mean_cycles: f64,
    pub min_cycles: u64,
    pub max_cycles: u64,
    pub count: usize,
}

pub fn read_metrics_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().collect()
}
