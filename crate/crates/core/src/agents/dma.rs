// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::axi::{AxiRequest, Dir, ManagerOut, Resp, SubordinateOut, TaintedReq};
use crate::kernel::{Component, Cx, ResetDomain, SignalId, SignalKind, SignalRegistry, SimError, TaintSet, Tv};

fn one() -> u32 {
    1
}

fn word() -> u8 {
    2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Descriptor {
    pub addr: u64,
    pub beats: u16,
    /// log2 of the beat size in bytes.
    #[serde(default = "word")]
    pub size: u8,
    pub dir: Dir,
    #[serde(default = "one")]
    pub repeat: u32,
    /// Issue the repeats back to back, up to `max_outstanding` in flight.
    #[serde(default)]
    pub train: bool,
}

impl Descriptor {
    pub fn new(dir: Dir, addr: u64, beats: u16) -> Self {
        Self { addr, beats, size: 2, dir, repeat: 1, train: false }
    }

    pub fn repeat(mut self, n: u32) -> Self {
        self.repeat = n;
        self
    }

    pub fn train(mut self) -> Self {
        self.train = true;
        self
    }

    fn request(&self) -> AxiRequest {
        AxiRequest::incr(self.dir, self.addr, self.beats, self.size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DmaMode {
    /// Run the descriptor list once.
    #[default]
    Legal,
    /// Cycle through the list forever, one request at a time.
    IllegalRetry,
    /// Cycle through the list forever with up to 16 requests in flight.
    Flood,
}

fn one_u() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DmaProgram {
    #[serde(default)]
    pub mode: DmaMode,
    #[serde(default)]
    pub descriptors: Vec<Descriptor>,
    /// Idle cycles between completions and the next issue.
    #[serde(default)]
    pub gap_cycles: u64,
    #[serde(default = "one_u")]
    pub max_outstanding: usize,
    #[serde(default)]
    pub start_cycle: u64,
}

impl Default for DmaProgram {
    fn default() -> Self {
        Self::legal(Vec::new())
    }
}

impl DmaProgram {
    pub fn legal(descriptors: Vec<Descriptor>) -> Self {
        Self { mode: DmaMode::Legal, descriptors, gap_cycles: 0, max_outstanding: 1, start_cycle: 0 }
    }

    pub fn with_mode(mut self, mode: DmaMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_gap(mut self, gap: u64) -> Self {
        self.gap_cycles = gap;
        self
    }

    pub fn with_outstanding(mut self, n: usize) -> Self {
        self.max_outstanding = n;
        self
    }

    pub fn starting_at(mut self, cycle: u64) -> Self {
        self.start_cycle = cycle;
        self
    }
}

/// One completed or abandoned transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxnRecord {
    pub descriptor: usize,
    /// Sequence number of the descriptor pass; trains share it.
    pub group: u64,
    pub dir: Dir,
    pub id: u16,
    pub addr: u64,
    pub beats: u16,
    pub issue_cycle: u64,
    pub accept_cycle: u64,
    /// Cycle of the last R beat or of the B response.
    pub done_cycle: Option<u64>,
    pub received: u16,
    pub resp: Resp,
    pub abandoned: bool,
}

impl TxnRecord {
    /// Accept-to-completion latency, both ends inclusive.
    pub fn latency(&self) -> Option<u64> {
        self.done_cycle.map(|d| d - self.accept_cycle + 1)
    }
}

const MAX_IDS: usize = 16;

#[derive(Debug, Clone)]
struct Pending {
    desc: usize,
    group: u64,
    req: AxiRequest,
    issue: u64,
}

/// DMA-style bus controller driven by a descriptor program.
#[derive(Debug)]
pub struct Dma {
    name: String,
    prog: DmaProgram,
    in_prefix: String,
    reset_name: Option<String>,
    inp: Option<SubordinateOut>,
    rst: Option<SignalId>,
    out: ManagerOut,

    pos: usize,
    rep: u32,
    group: u64,
    done: bool,
    ready_at: u64,
    rst_prev: bool,
    presented_r: Option<Pending>,
    presented_w: Option<Pending>,
    inflight: Vec<Option<usize>>,
    w_queue: VecDeque<(usize, u16)>,
    w_counter: u64,
    records: Vec<TxnRecord>,
    strays: u64,
    next_id: u16,
}

impl Dma {
    /// `in_prefix` names the subordinate outputs this controller talks to;
    /// `reset` an optional active-high controller reset line.
    pub fn new(
        reg: &mut SignalRegistry,
        owner: usize,
        name: &str,
        prog: DmaProgram,
        in_prefix: &str,
        reset: Option<&str>,
    ) -> Result<Self, SimError> {
        if prog.mode != DmaMode::Legal && prog.descriptors.is_empty() {
            return Err(SimError::Config(format!("{name}: a looping program needs descriptors")));
        }
        if prog.max_outstanding == 0 || prog.max_outstanding > MAX_IDS {
            return Err(SimError::Config(format!("{name}: max_outstanding must lie in 1..=16")));
        }
        for d in &prog.descriptors {
            if d.beats == 0 || d.beats > 256 || d.size > 3 {
                return Err(SimError::Config(format!("{name}: unsupported descriptor {d:?}")));
            }
        }
        let done = prog.descriptors.is_empty();
        let out =
            ManagerOut::register(reg, owner, &format!("{name}.m."), ResetDomain::Local, &|_| SignalKind::Registered)?;
        Ok(Self {
            name: name.to_string(),
            prog,
            in_prefix: in_prefix.to_string(),
            reset_name: reset.map(str::to_string),
            inp: None,
            rst: None,
            out,
            pos: 0,
            rep: 0,
            group: 0,
            done,
            ready_at: 0,
            rst_prev: false,
            presented_r: None,
            presented_w: None,
            inflight: vec![None; MAX_IDS],
            w_queue: VecDeque::new(),
            w_counter: 0,
            records: Vec::new(),
            strays: 0,
            next_id: 0,
        })
    }

    pub fn records(&self) -> &[TxnRecord] {
        &self.records
    }

    /// Responses that matched no transaction in flight.
    pub fn strays(&self) -> u64 {
        self.strays
    }

    pub fn outstanding(&self) -> usize {
        self.inflight.iter().filter(|s| s.is_some()).count()
            + usize::from(self.presented_r.is_some())
            + usize::from(self.presented_w.is_some())
    }

    /// The program has no more requests to issue and nothing is in flight.
    pub fn finished(&self) -> bool {
        self.done && self.outstanding() == 0
    }

    fn limit(&self) -> usize {
        match self.prog.mode {
            DmaMode::Flood => MAX_IDS,
            DmaMode::IllegalRetry => 1,
            DmaMode::Legal => {
                if self.prog.descriptors.get(self.pos).is_some_and(|d| d.train) {
                    self.prog.max_outstanding
                } else {
                    1
                }
            }
        }
    }

    fn advance(&mut self) {
        let n = self.prog.descriptors.len();
        self.rep += 1;
        if self.rep >= self.prog.descriptors[self.pos].repeat {
            self.rep = 0;
            self.pos += 1;
            self.group += 1;
            if self.pos == n {
                if self.prog.mode == DmaMode::Legal {
                    self.done = true;
                } else {
                    self.pos = 0;
                }
            }
        } else if !self.prog.descriptors[self.pos].train {
            self.group += 1;
        }
    }

    fn skip_descriptor(&mut self) {
        if self.done || self.prog.descriptors.is_empty() {
            return;
        }
        self.rep = self.prog.descriptors[self.pos].repeat.saturating_sub(1);
        self.advance();
    }

    fn free_id(&self) -> Option<u16> {
        (0..MAX_IDS as u16).map(|k| (self.next_id + k) % MAX_IDS as u16).find(|&i| self.inflight[i as usize].is_none())
    }

    fn controller_reset(&mut self) {
        for r in self.records.iter_mut().filter(|r| r.done_cycle.is_none()) {
            r.abandoned = true;
        }
        self.inflight.iter_mut().for_each(|s| *s = None);
        self.presented_r = None;
        self.presented_w = None;
        self.w_queue.clear();
        self.skip_descriptor();
    }

    fn accept(&mut self, p: Pending, now: u64) {
        let idx = self.records.len();
        self.records.push(TxnRecord {
            descriptor: p.desc,
            group: p.group,
            dir: p.req.dir,
            id: p.req.id,
            addr: p.req.addr,
            beats: p.req.beats(),
            issue_cycle: p.issue,
            accept_cycle: now - 1,
            done_cycle: None,
            received: 0,
            resp: Resp::Okay,
            abandoned: false,
        });
        self.inflight[p.req.id as usize] = Some(idx);
        if p.req.dir == Dir::Write {
            self.w_queue.push_back((idx, p.req.beats()));
        }
    }

    fn complete(&mut self, id: u16, resp: u64, last: bool, now: u64) {
        let Some(idx) = self.inflight.get(id as usize).copied().flatten() else {
            self.strays += 1;
            return;
        };
        let r = &mut self.records[idx];
        r.received += 1;
        r.resp = r.resp.worst(Resp::decode(resp));
        if last {
            r.done_cycle = Some(now - 1);
            self.inflight[id as usize] = None;
            self.ready_at = self.ready_at.max(now + self.prog.gap_cycles);
        }
    }
}

impl Component for Dma {
    fn name(&self) -> &str {
        &self.name
    }

    fn bind(&mut self, reg: &SignalRegistry) -> Result<(), SimError> {
        self.inp = Some(SubordinateOut::bind(reg, &self.in_prefix)?);
        if let Some(r) = &self.reset_name {
            self.rst = Some(reg.id(r)?);
        }
        Ok(())
    }

    fn tick(&mut self, cx: &mut Cx<'_>) {
        let (inp, out) = (self.inp.expect("bound"), self.out);
        let now = cx.cycle();
        let rst = self.rst.is_some_and(|r| cx.bit(r));
        let edge = rst && !self.rst_prev;
        self.rst_prev = rst;
        if rst {
            if edge {
                self.controller_reset();
            }
            for id in out.ids() {
                cx.clear(id);
            }
            self.ready_at = now + 1;
            return;
        }
        if cx.bit(out.ar_valid) && cx.bit(inp.ar_ready) {
            if let Some(p) = self.presented_r.take() {
                self.accept(p, now);
            }
        }
        if cx.bit(out.aw_valid) && cx.bit(inp.aw_ready) {
            if let Some(p) = self.presented_w.take() {
                self.accept(p, now);
            }
        }
        if cx.bit(out.w_valid) && cx.bit(inp.w_ready) {
            self.w_counter = self.w_counter.wrapping_add(1);
            if let Some((_, left)) = self.w_queue.front_mut() {
                *left -= 1;
                if *left == 0 {
                    self.w_queue.pop_front();
                }
            }
        }
        if cx.bit(inp.r_valid) && cx.bit(out.r_ready) {
            self.complete(cx.val(inp.r_id) as u16, cx.val(inp.r_resp), cx.bit(inp.r_last), now);
        }
        if cx.bit(inp.b_valid) && cx.bit(out.b_ready) {
            self.complete(cx.val(inp.b_id) as u16, cx.val(inp.b_resp), true, now);
        }

        // Issue.
        let busy = self.presented_r.is_some() || self.presented_w.is_some();
        if !self.done && !busy && now >= self.prog.start_cycle.max(self.ready_at) && self.outstanding() < self.limit() {
            if let Some(id) = self.free_id() {
                let d = &self.prog.descriptors[self.pos];
                let p = Pending { desc: self.pos, group: self.group, req: d.request().with_id(id), issue: now };
                self.next_id = (id + 1) % MAX_IDS as u16;
                match d.dir {
                    Dir::Read => self.presented_r = Some(p),
                    Dir::Write => self.presented_w = Some(p),
                }
                self.advance();
            }
        }

        let to_req = |p: &Option<Pending>| p.as_ref().map(|p| TaintedReq::clean(p.req));
        out.drive_request(cx, Dir::Read, to_req(&self.presented_r).as_ref());
        out.drive_request(cx, Dir::Write, to_req(&self.presented_w).as_ref());
        match self.w_queue.front() {
            Some(&(_, left)) => {
                cx.set_tv(out.w_data, Tv::clean(self.w_counter & 0xFFFF_FFFF));
                cx.set_clean(out.w_last, u64::from(left == 1));
                cx.set(out.w_valid, 1, TaintSet::new());
            }
            None => {
                for id in [out.w_data, out.w_last, out.w_valid] {
                    cx.clear(id);
                }
            }
        }
        cx.set_clean(out.r_ready, 1);
        cx.set_clean(out.b_ready, 1);
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}
