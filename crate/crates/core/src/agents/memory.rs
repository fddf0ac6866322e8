// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::axi::{AxiRequest, Dir, ManagerOut, Resp, SubordinateOut, TaintedB, TaintedBeat};
use crate::kernel::{
    register, Component, Cx, ResetDomain, SignalId, SignalKind, SignalRegistry, SimError, TaintSet, Tv,
};

/// Memories up to this size expose one signal per 32-bit word.
pub const WORD_SIGNAL_LIMIT: u64 = 4096;

fn four() -> u64 {
    4
}

fn two() -> u64 {
    2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub name: String,
    pub base: u64,
    pub size: u64,
    #[serde(default = "four")]
    pub read_latency: u64,
    #[serde(default = "two")]
    pub write_latency: u64,
}

impl MemoryConfig {
    pub fn new(name: impl Into<String>, base: u64, size: u64) -> Self {
        Self { name: name.into(), base, size, read_latency: 4, write_latency: 2 }
    }

    pub fn with_latency(mut self, read: u64, write: u64) -> Self {
        self.read_latency = read;
        self.write_latency = write;
        self
    }
}

/// Name of the signal holding the word at byte address `addr`.
pub fn word_signal(mem: &str, addr: u64) -> String {
    format!("{mem}.word[{:#x}]", addr & !3)
}

#[derive(Debug, Clone)]
enum Job {
    Read { req: AxiRequest, t: TaintSet, id: Tv, next: u16, first_at: u64 },
    Write { req: AxiRequest, t: TaintSet, id: Tv, next: u16, b_at: Option<u64> },
}

/// Fixed-latency memory serving one burst at a time.
#[derive(Debug)]
pub struct Memory {
    cfg: MemoryConfig,
    in_prefix: String,
    inp: Option<ManagerOut>,
    out: SubordinateOut,
    words: Vec<SignalId>,
    sparse: BTreeMap<u64, Tv>,
    summary: SignalId,
    summary_taint: TaintSet,
    job: Option<Job>,
    r_out: Option<TaintedBeat>,
    b_out: Option<TaintedB>,
}

impl Memory {
    /// `in_prefix` names the fabric port driving this memory.
    pub fn new(reg: &mut SignalRegistry, owner: usize, cfg: MemoryConfig, in_prefix: &str) -> Result<Self, SimError> {
        if cfg.size == 0 || !cfg.base.is_multiple_of(4) || !cfg.size.is_multiple_of(4) {
            return Err(SimError::Config(format!("{}: region must be non-empty and word aligned", cfg.name)));
        }
        if cfg.read_latency == 0 || cfg.write_latency == 0 {
            return Err(SimError::Config(format!("{}: latencies must be at least one cycle", cfg.name)));
        }
        let d = ResetDomain::System;
        let out = SubordinateOut::register(reg, owner, &format!("{}.s.", cfg.name), d, &|_| SignalKind::Registered)?;
        let mut words = Vec::new();
        if cfg.size <= WORD_SIGNAL_LIMIT {
            for w in 0..cfg.size / 4 {
                words.push(register(
                    reg,
                    owner,
                    word_signal(&cfg.name, cfg.base + 4 * w),
                    32,
                    SignalKind::Registered,
                    d,
                )?);
            }
        }
        let summary = register(reg, owner, format!("{}.mem", cfg.name), 32, SignalKind::Registered, d)?;
        Ok(Self {
            cfg,
            in_prefix: in_prefix.to_string(),
            inp: None,
            out,
            words,
            sparse: BTreeMap::new(),
            summary,
            summary_taint: TaintSet::new(),
            job: None,
            r_out: None,
            b_out: None,
        })
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.cfg
    }

    fn in_range(&self, req: &AxiRequest) -> bool {
        req.beat_addresses()
            .iter()
            .all(|&a| a >= self.cfg.base && a + req.beat_bytes() <= self.cfg.base + self.cfg.size)
    }

    fn load(&self, cx: &Cx<'_>, addr: u64) -> Tv {
        let w = (addr - self.cfg.base) / 4;
        match self.words.get(w as usize) {
            Some(&id) => cx.get(id),
            None => self.sparse.get(&w).cloned().unwrap_or_else(|| Tv::clean(0)),
        }
    }

    fn store(&mut self, cx: &mut Cx<'_>, addr: u64, v: Tv) {
        let w = (addr - self.cfg.base) / 4;
        self.summary_taint.union_with(&v.t);
        match self.words.get(w as usize) {
            Some(&id) => cx.set_tv(id, v.clone()),
            None => {
                self.sparse.insert(w, v.clone());
            }
        }
    }

    fn beat(&self, cx: &Cx<'_>, req: &AxiRequest, t: &TaintSet, id: &Tv, i: u16) -> TaintedBeat {
        let addr = req.beat_addresses()[i as usize];
        let last = Tv::new(u64::from(i + 1 == req.beats()), t.clone());
        let mut data = self.load(cx, addr);
        if req.beat_bytes() == 8 {
            let hi = self.load(cx, addr + 4);
            data = Tv::new(data.v | hi.v << 32, data.t.union(&hi.t));
        }
        data.t.union_with(t);
        TaintedBeat { id: id.clone(), data, resp: Tv::new(Resp::Okay.encode(), t.clone()), last, valid: t.clone() }
    }

    fn error_beat(req: &AxiRequest, t: &TaintSet, id: &Tv, i: u16) -> TaintedBeat {
        TaintedBeat {
            id: id.clone(),
            data: Tv::new(0, t.clone()),
            resp: Tv::new(Resp::SlvErr.encode(), t.clone()),
            last: Tv::new(u64::from(i + 1 == req.beats()), t.clone()),
            valid: t.clone(),
        }
    }

    /// The request picks which words change, so every word depends on it.
    fn taint_all(&mut self, cx: &mut Cx<'_>, t: &TaintSet) {
        for &w in &self.words {
            let v = cx.get(w);
            cx.set(w, v.v, v.t.union(t));
        }
        for v in self.sparse.values_mut() {
            v.t.union_with(t);
        }
        self.summary_taint.union_with(t);
    }

    fn clear_state(&mut self, cx: &mut Cx<'_>) {
        self.job = None;
        self.r_out = None;
        self.b_out = None;
        self.sparse.clear();
        self.summary_taint = TaintSet::new();
        for &w in &self.words {
            cx.clear(w);
        }
        for id in self.out.ids() {
            cx.clear(id);
        }
        cx.clear(self.summary);
    }
}

impl Component for Memory {
    fn name(&self) -> &str {
        &self.cfg.name
    }

    fn bind(&mut self, reg: &SignalRegistry) -> Result<(), SimError> {
        self.inp = Some(ManagerOut::bind(reg, &self.in_prefix)?);
        Ok(())
    }

    fn tick(&mut self, cx: &mut Cx<'_>) {
        if cx.in_reset() {
            self.clear_state(cx);
            return;
        }
        let (inp, out) = (self.inp.expect("bound"), self.out);
        let now = cx.cycle();
        if cx.bit(out.r_valid) && cx.bit(inp.r_ready) {
            self.r_out = None;
            if let Some(Job::Read { next, req, .. }) = self.job.as_mut() {
                *next += 1;
                if *next == req.beats() {
                    self.job = None;
                }
            }
        }
        if cx.bit(out.b_valid) && cx.bit(inp.b_ready) {
            self.b_out = None;
            self.job = None;
        }
        if cx.bit(inp.w_valid) && cx.bit(out.w_ready) {
            let data = cx.get(inp.w_data);
            let wt = cx.taint(inp.w_valid).clone();
            let mut target = None;
            if let Some(Job::Write { req, t, next, b_at, .. }) = self.job.as_mut() {
                target = Some((req.beat_addresses()[*next as usize], req.beat_bytes(), t.union(&wt)));
                *next += 1;
                if *next == req.beats() {
                    *b_at = Some(now - 1 + self.cfg.write_latency);
                }
            }
            if let Some((addr, bytes, t)) = target {
                if addr >= self.cfg.base && addr + bytes <= self.cfg.base + self.cfg.size {
                    let vt = data.t.union(&t);
                    self.store(cx, addr, Tv::new(data.v & 0xFFFF_FFFF, vt.clone()));
                    if bytes == 8 {
                        self.store(cx, addr + 4, Tv::new(data.v >> 32, vt));
                    }
                }
            }
        }
        let idle = self.job.is_none();
        for (valid, ready, dir) in [(inp.ar_valid, out.ar_ready, Dir::Read), (inp.aw_valid, out.aw_ready, Dir::Write)] {
            if idle && cx.bit(valid) && cx.bit(ready) {
                let tr = inp.request(cx, dir);
                let t = tr.t.all();
                let id = Tv::new(u64::from(tr.req.id), tr.t.id.clone());
                if dir == Dir::Write && !t.is_empty() {
                    self.taint_all(cx, &t);
                }
                self.job = Some(match dir {
                    Dir::Read => Job::Read { req: tr.req, t, id, next: 0, first_at: now - 1 + self.cfg.read_latency },
                    Dir::Write => Job::Write { req: tr.req, t, id, next: 0, b_at: None },
                });
            }
        }

        // Outputs.
        match &self.job {
            Some(Job::Read { req, t, id, next, first_at }) if self.r_out.is_none() && now >= *first_at => {
                let beat = if self.in_range(req) {
                    self.beat(cx, req, t, id, *next)
                } else {
                    Self::error_beat(req, t, id, *next)
                };
                self.r_out = Some(beat);
            }
            Some(Job::Write { req, t, id, b_at: Some(at), .. }) if self.b_out.is_none() && now >= *at => {
                let resp = if self.in_range(req) { Resp::Okay } else { Resp::SlvErr };
                self.b_out =
                    Some(TaintedB { id: id.clone(), resp: Tv::new(resp.encode(), t.clone()), valid: t.clone() });
            }
            _ => {}
        }
        let idle = self.job.is_none();
        cx.set_clean(out.ar_ready, u64::from(idle));
        cx.set_clean(out.aw_ready, u64::from(idle));
        let w_ready = matches!(&self.job, Some(Job::Write { req, next, .. }) if *next < req.beats());
        cx.set_clean(out.w_ready, u64::from(w_ready));
        out.drive_beat(cx, self.r_out.as_ref());
        out.drive_b(cx, self.b_out.as_ref());
        let count = if self.words.is_empty() {
            self.sparse.len() as u64
        } else {
            self.words.iter().filter(|&&w| cx.val(w) != 0 || !cx.taint(w).is_empty()).count() as u64
        };
        let mut t = self.summary_taint.clone();
        for &w in &self.words {
            t.union_with(cx.taint(w));
        }
        cx.set(self.summary, count, t);
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}
