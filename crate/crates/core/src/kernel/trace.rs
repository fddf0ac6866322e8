// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::io::{self, Write};

use super::signal::{SignalId, SignalRegistry};
use super::SimError;

/// Per-cycle samples of a watch-list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    names: Vec<String>,
    ids: Vec<SignalId>,
    widths: Vec<u8>,
    index: HashMap<String, usize>,
    cycles: Vec<u64>,
    values: Vec<u64>,
}

impl Trace {
    pub fn new(names: Vec<String>, ids: Vec<SignalId>) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Self { names, ids, widths: Vec::new(), index, cycles: Vec::new(), values: Vec::new() }
    }

    /// Builds a trace from literal rows; used by checkers and tests.
    pub fn from_rows(names: &[&str], rows: &[(u64, Vec<u64>)]) -> Self {
        let mut t = Self::new(names.iter().map(|s| s.to_string()).collect(), Vec::new());
        t.widths = vec![64; names.len()];
        for (c, row) in rows {
            assert_eq!(row.len(), names.len());
            t.cycles.push(*c);
            t.values.extend_from_slice(row);
        }
        t
    }

    pub fn sample(&mut self, cycle: u64, reg: &SignalRegistry) {
        if self.widths.is_empty() {
            self.widths = self.ids.iter().map(|&i| reg.meta(i).width).collect();
        }
        self.cycles.push(cycle);
        self.values.extend(self.ids.iter().map(|&i| reg.value(i)));
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cycles(&self) -> &[u64] {
        &self.cycles
    }

    pub fn column(&self, name: &str) -> Result<usize, SimError> {
        self.index.get(name).copied().ok_or_else(|| SimError::UnknownSignal(name.to_string()))
    }

    pub fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> u64 {
        self.values[row * self.names.len() + col]
    }

    pub fn get(&self, name: &str, row: usize) -> Result<u64, SimError> {
        Ok(self.at(row, self.column(name)?))
    }

    pub fn row(&self, row: usize) -> &[u64] {
        let w = self.names.len();
        &self.values[row * w..(row + 1) * w]
    }

    /// Writes the trace as a value change dump.
    pub fn write_vcd<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "$timescale 1ns $end")?;
        writeln!(out, "$scope module top $end")?;
        let codes: Vec<String> = (0..self.names.len()).map(vcd_code).collect();
        for (i, n) in self.names.iter().enumerate() {
            let w = self.widths.get(i).copied().unwrap_or(64);
            writeln!(out, "$var wire {} {} {} $end", w, codes[i], n.replace(' ', "_"))?;
        }
        writeln!(out, "$upscope $end")?;
        writeln!(out, "$enddefinitions $end")?;
        let mut last: Option<&[u64]> = None;
        for r in 0..self.len() {
            let row = self.row(r);
            writeln!(out, "#{}", self.cycles[r])?;
            for (i, &v) in row.iter().enumerate() {
                if last.is_some_and(|l| l[i] == v) {
                    continue;
                }
                let w = self.widths.get(i).copied().unwrap_or(64);
                if w == 1 {
                    writeln!(out, "{}{}", v, codes[i])?;
                } else {
                    writeln!(out, "b{:b} {}", v, codes[i])?;
                }
            }
            last = Some(row);
        }
        Ok(())
    }
}

fn vcd_code(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (i % 94) as u8) as char);
        i /= 94;
        if i == 0 {
            break;
        }
    }
    s
}
