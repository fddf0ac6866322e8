// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::ast::Kind;
use crate::eval::{PropertyResult, Status};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub total: usize,
    pub pass: usize,
    pub fail: usize,
    pub not_covered: usize,
}

impl Counts {
    fn add(&mut self, s: Status) {
        self.total += 1;
        match s {
            Status::Pass => self.pass += 1,
            Status::Fail => self.fail += 1,
            Status::NotCovered => self.not_covered += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub summary: Counts,
    pub by_kind: BTreeMap<Kind, Counts>,
    pub results: Vec<PropertyResult>,
}

impl Report {
    pub fn new(mut results: Vec<PropertyResult>) -> Self {
        results.sort_by(|a, b| a.id.cmp(&b.id));
        let mut summary = Counts::default();
        let mut by_kind: BTreeMap<Kind, Counts> = BTreeMap::new();
        for r in &results {
            summary.add(r.status);
            by_kind.entry(r.kind).or_default().add(r.status);
        }
        Self { summary, by_kind, results }
    }

    /// True when nothing failed and every property was exercised.
    pub fn clean(&self) -> bool {
        self.summary.fail == 0 && self.summary.not_covered == 0
    }

    pub fn failed(&self) -> impl Iterator<Item = &PropertyResult> {
        self.results.iter().filter(|r| r.status == Status::Fail)
    }

    /// Human-readable table. With `all` false only non-passing rows are
    /// listed.
    pub fn table(&self, all: bool) -> String {
        let mut s = String::new();
        let rows: Vec<_> = self.results.iter().filter(|r| all || r.status != Status::Pass).collect();
        let w = rows.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
        if !rows.is_empty() {
            let _ = writeln!(s, "{:<w$}  {:<5}  {:<11}  {:>8}  first", "id", "kind", "status", "failures");
            for r in rows {
                let kind = match r.kind {
                    Kind::Ift => "ift",
                    Kind::Trace => "trace",
                };
                let status = match r.status {
                    Status::Pass => "pass",
                    Status::Fail => "FAIL",
                    Status::NotCovered => "not-covered",
                };
                let first = r.first_failure().map_or("-".to_string(), |c| c.to_string());
                let _ = writeln!(s, "{:<w$}  {kind:<5}  {status:<11}  {:>8}  {first}", r.id, r.failure_count);
            }
        }
        for (k, c) in &self.by_kind {
            let _ = writeln!(
                s,
                "{:<5} total {:>5}  pass {:>5}  fail {:>5}  not covered {:>5}",
                format!("{k:?}").to_lowercase(),
                c.total,
                c.pass,
                c.fail,
                c.not_covered
            );
        }
        let c = self.summary;
        let _ = writeln!(
            s,
            "all   total {:>5}  pass {:>5}  fail {:>5}  not covered {:>5}",
            c.total, c.pass, c.fail, c.not_covered
        );
        s
    }
}
