// SPDX-License-Identifier: Apache-2.0

//! Ratio tables from metrics CSV files.

use serde::{Deserialize, Serialize};

use crate::scenario::CsvRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub probe: String,
    pub design: String,
    pub mean_cycles: f64,
    pub ratio: f64,
}

/// Probe names of the form `experiment:probe` are compared with the
/// Design (a) row of `isolation:probe`; other names with the Design (a)
/// row of the same probe. Rows without a baseline get NaN.
pub fn ratio_table(rows: &[CsvRow]) -> Vec<RatioRow> {
    let base = |probe: &str| {
        let key = match probe.split_once(':') {
            Some((_, p)) => format!("isolation:{p}"),
            None => probe.to_string(),
        };
        rows.iter()
            .find(|r| r.design == "a" && r.probe == key)
            .or_else(|| rows.iter().find(|r| r.design == "a" && r.probe == probe))
            .map_or(f64::NAN, |r| r.mean_cycles)
    };
    rows.iter()
        .map(|r| RatioRow {
            probe: r.probe.clone(),
            design: r.design.clone(),
            mean_cycles: r.mean_cycles,
            ratio: r.mean_cycles / base(&r.probe),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(probe: &str, design: &str, mean: f64) -> CsvRow {
        CsvRow {
            probe: probe.into(),
            design: design.into(),
            txn_beats: 16,
            mean_cycles: mean,
            min_cycles: 0,
            max_cycles: 0,
            count: 1,
        }
    }

    #[test]
    fn uses_isolation_baseline() {
        let rows = [row("isolation:c1/16", "a", 10.0), row("dos:c1/16", "b", 50.0), row("dos:c1/16", "a", 10.0)];
        let t = ratio_table(&rows);
        assert_eq!(t[1].ratio, 5.0);
        assert_eq!(t[2].ratio, 1.0);
    }

    #[test]
    fn missing_baseline_is_nan() {
        assert!(ratio_table(&[row("x", "b", 3.0)])[0].ratio.is_nan());
    }
}
