// SPDX-License-Identifier: Apache-2.0

//! Isolation, interference and DoS experiments with ratio tables against
//! the Design (a) isolation baseline.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::{scenarios, Design, Experiment};
use crate::scenario::{run_scenario, ProbeMetrics, ScenarioError};

pub const DEFAULT_REPS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub design: Design,
    pub metrics: ProbeMetrics,
    /// Mean latency over the Design (a) isolation mean of the same probe.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub experiment: Experiment,
    pub rows: Vec<Row>,
    /// False when some run hit its cycle budget.
    pub complete: bool,
    pub violations: usize,
    pub fsm_violations: usize,
}

impl ComparisonReport {
    pub fn ratio(&self, design: Design, controller: &str, txn_beats: u64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.design == design && r.metrics.controller == controller && r.metrics.txn_beats == txn_beats)
            .map(|r| r.ratio)
    }

    pub fn ratios(&self, design: Design) -> Vec<(u64, f64)> {
        self.rows.iter().filter(|r| r.design == design).map(|r| (r.metrics.txn_beats, r.ratio)).collect()
    }

    pub fn table(&self) -> String {
        let mut s = format!("{}\n", self.experiment.label());
        let _ = writeln!(s, "{:<8} {:<10} {:>10} {:>12} {:>8}", "design", "probe", "beats", "mean", "ratio");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<8} {:<10} {:>10} {:>12.1} {:>8.3}",
                r.design.label(),
                r.metrics.controller,
                r.metrics.txn_beats,
                r.metrics.mean_cycles,
                r.ratio
            );
        }
        s
    }

    pub fn metrics_rows(&self) -> Vec<(String, ProbeMetrics)> {
        self.rows.iter().map(|r| (r.design.label().to_string(), r.metrics.clone())).collect()
    }
}

struct Run {
    design: Design,
    metrics: Vec<ProbeMetrics>,
    complete: bool,
    violations: usize,
    fsm_violations: usize,
}

fn run_all(exp: Experiment, reps: u32) -> Result<Vec<Run>, ScenarioError> {
    let jobs: Vec<_> =
        Design::ALL.into_iter().flat_map(|d| scenarios(exp, d, reps).into_iter().map(move |s| (d, s))).collect();
    jobs.par_iter()
        .map(|(d, s)| {
            let r = run_scenario(s)?;
            Ok(Run {
                design: *d,
                metrics: r.probes,
                complete: r.complete,
                violations: r.violations,
                fsm_violations: r.fsm_violations,
            })
        })
        .collect()
}

/// Design (a) isolation means, per (controller, beats).
fn baseline(reps: u32) -> Result<Vec<ProbeMetrics>, ScenarioError> {
    let runs: Vec<_> =
        scenarios(Experiment::Isolation, Design::A, reps).par_iter().map(run_scenario).collect::<Result<_, _>>()?;
    Ok(runs.into_iter().flat_map(|r| r.probes).collect())
}

pub fn run_experiment(exp: Experiment, reps: u32) -> Result<ComparisonReport, ScenarioError> {
    let (base, runs) = rayon::join(|| baseline(reps), || run_all(exp, reps));
    let (base, runs) = (base?, runs?);
    let mut rows = Vec::new();
    let mut complete = true;
    let (mut violations, mut fsm_violations) = (0, 0);
    for run in runs {
        complete &= run.complete;
        violations += run.violations;
        fsm_violations += run.fsm_violations;
        for m in run.metrics {
            let b = base
                .iter()
                .find(|b| b.controller == m.controller && b.txn_beats == m.txn_beats)
                .map_or(f64::NAN, |b| b.mean_cycles);
            rows.push(Row { design: run.design, ratio: m.mean_cycles / b, metrics: m });
        }
    }
    rows.sort_by(|a, b| {
        (a.design, &a.metrics.controller, a.metrics.txn_beats).cmp(&(
            b.design,
            &b.metrics.controller,
            b.metrics.txn_beats,
        ))
    });
    Ok(ComparisonReport { experiment: exp, rows, complete, violations, fsm_violations })
}
