// SPDX-License-Identifier: Apache-2.0

//! Crossbar interconnect with address decode, round-robin arbitration and the
//! two fabric-side access control designs.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::acw::Region;
use crate::axi::{
    burst_footprint, AxiRequest, Dir, ManagerOut, Resp, SubordinateOut, TaintedB, TaintedBeat, TaintedReq,
};
use crate::kernel::{Component, Cx, ResetDomain, SignalKind, SignalRegistry, SimError, TaintSet, Tv};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AddressMap {
    entries: Vec<(usize, Region)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decode {
    Hit(usize),
    Miss,
}

impl AddressMap {
    /// Fails if two enabled entries overlap.
    pub fn new(entries: Vec<(usize, Region)>) -> Result<Self, SimError> {
        for (i, a) in entries.iter().enumerate() {
            if !a.1.enabled() {
                return Err(SimError::Config(format!("peripheral {} has an empty region", a.0)));
            }
            for b in &entries[i + 1..] {
                if a.1.overlaps(&b.1) {
                    return Err(SimError::Config(format!(
                        "peripheral regions overlap: [{:#x},{:#x}) and [{:#x},{:#x})",
                        a.1.base,
                        a.1.end(),
                        b.1.base,
                        b.1.end()
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(usize, Region)] {
        &self.entries
    }

    pub fn decode(&self, addr: u64) -> Decode {
        self.entries
            .iter()
            .find(|(_, r)| addr >= r.base && addr < r.end())
            .map_or(Decode::Miss, |&(p, _)| Decode::Hit(p))
    }

    /// Decodes a whole burst; bursts leaving their peripheral miss.
    pub fn decode_burst(&self, req: &AxiRequest) -> Decode {
        let Ok(fp) = burst_footprint(req) else { return Decode::Miss };
        match self.decode(fp.lo) {
            Decode::Hit(p) => {
                let r = self.entries.iter().find(|e| e.0 == p).expect("entry").1;
                if fp.hi <= r.end() {
                    Decode::Hit(p)
                } else {
                    Decode::Miss
                }
            }
            Decode::Miss => Decode::Miss,
        }
    }
}

pub fn decode_address(map: &AddressMap, addr: u64) -> Decode {
    map.decode(addr)
}

/// Round-robin arbiter; `last` is the most recent grant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRobin {
    n: usize,
    last: usize,
}

impl RoundRobin {
    pub fn new(n: usize) -> Self {
        Self { n, last: n.saturating_sub(1) }
    }

    pub fn with_last(n: usize, last: usize) -> Self {
        Self { n, last }
    }

    pub fn last(&self) -> usize {
        self.last
    }

    /// Grants the first requester strictly after the last grant.
    pub fn arbitrate(&mut self, requests: &[bool]) -> Option<usize> {
        let n = self.n;
        let g = (1..=n).map(|k| (self.last + k) % n).find(|&i| requests[i])?;
        self.last = g;
        Some(g)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSegment {
    pub name: String,
    pub base: u64,
    pub size: u64,
    /// Controllers allowed to read.
    #[serde(default)]
    pub read: Vec<String>,
    /// Controllers allowed to write.
    #[serde(default)]
    pub write: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForbiddenRule {
    pub peripheral: String,
    pub base: u64,
    pub size: u64,
    /// Rules cannot name a controller: requests carry no source identity at
    /// the peripheral.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FilterMode {
    #[default]
    PassThrough,
    StaticMatrix {
        segments: Vec<MatrixSegment>,
    },
    PeripheralFilter {
        rules: Vec<ForbiddenRule>,
        #[serde(default)]
        error_overhead: u32,
    },
}

/// Filter resolved against the fabric's port indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Filter {
    PassThrough,
    Static(Vec<(Region, Vec<bool>, Vec<bool>)>),
    Peripheral { forbidden: Vec<Vec<Region>>, overhead: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Admission {
    Admit,
    RejectAtSource,
    RejectAtPeripheral,
}

impl Filter {
    pub fn resolve(mode: &FilterMode, managers: &[String], subordinates: &[String]) -> Result<Self, SimError> {
        let idx = |names: &[String], n: &str, what: &str| {
            names.iter().position(|m| m == n).ok_or_else(|| SimError::Config(format!("unknown {what} `{n}` in filter")))
        };
        match mode {
            FilterMode::PassThrough => Ok(Filter::PassThrough),
            FilterMode::StaticMatrix { segments } => {
                let mut out = Vec::new();
                for s in segments {
                    let mut read = vec![false; managers.len()];
                    let mut write = vec![false; managers.len()];
                    for c in &s.read {
                        read[idx(managers, c, "controller")?] = true;
                    }
                    for c in &s.write {
                        write[idx(managers, c, "controller")?] = true;
                    }
                    out.push((Region::new(s.base, s.size), read, write));
                }
                Ok(Filter::Static(out))
            }
            FilterMode::PeripheralFilter { rules, error_overhead } => {
                let mut forbidden = vec![Vec::new(); subordinates.len()];
                for r in rules {
                    if let Some(c) = &r.controller {
                        return Err(SimError::Config(format!(
                            "peripheral-side rule for `{c}` is not expressible: requests reach the peripheral without source identity"
                        )));
                    }
                    forbidden[idx(subordinates, &r.peripheral, "peripheral")?].push(Region::new(r.base, r.size));
                }
                Ok(Filter::Peripheral { forbidden, overhead: *error_overhead })
            }
        }
    }

    /// Static decision only; the peripheral filter is applied at the port.
    fn source_allows(&self, src: usize, req: &AxiRequest) -> bool {
        match self {
            Filter::Static(segs) => {
                let Ok(fp) = burst_footprint(req) else { return false };
                let mut hit = false;
                for (r, rd, wr) in segs {
                    if r.enabled() && fp.lo < r.end() && r.base < fp.hi {
                        hit = true;
                        let ok = match req.dir {
                            Dir::Read => rd[src],
                            Dir::Write => wr[src],
                        };
                        if !ok {
                            return false;
                        }
                    }
                }
                hit
            }
            _ => true,
        }
    }

    fn port_forbids(&self, port: usize, req: &AxiRequest) -> bool {
        match self {
            Filter::Peripheral { forbidden, .. } => {
                let Ok(fp) = burst_footprint(req) else { return true };
                forbidden[port].iter().any(|r| fp.lo < r.end() && r.base < fp.hi)
            }
            _ => false,
        }
    }
}

pub fn filter_admit(filter: &Filter, map: &AddressMap, src: usize, req: &AxiRequest) -> Admission {
    if !filter.source_allows(src, req) {
        return Admission::RejectAtSource;
    }
    match map.decode_burst(req) {
        Decode::Hit(p) if filter.port_forbids(p, req) => Admission::RejectAtPeripheral,
        _ => Admission::Admit,
    }
}

fn default_depth() -> usize {
    8
}

fn default_pipeline() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FabricConfig {
    pub name: String,
    pub managers: Vec<String>,
    pub subordinates: Vec<String>,
    #[serde(default = "default_depth")]
    pub queue_depth: usize,
    /// Cycles from manager acceptance to eligibility at the peripheral port.
    #[serde(default = "default_pipeline")]
    pub pipeline: u32,
    #[serde(default)]
    pub filter: FilterMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Port(usize),
    Local(Resp),
}

#[derive(Debug, Clone)]
struct Slot {
    tr: TaintedReq,
    target: Target,
    ready_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WRoute {
    Port(usize),
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RSrc {
    Port(usize),
    Local,
}

#[derive(Debug)]
struct LocalRead {
    id: u16,
    left: u16,
    resp: Resp,
}

#[derive(Debug, Default)]
struct MgrPort {
    ar: Option<Slot>,
    aw: Option<Slot>,
    w_routes: VecDeque<(WRoute, u16)>,
    local_r: VecDeque<LocalRead>,
    /// Local write errors: (id, resp, all W beats consumed).
    local_b: VecDeque<(u16, Resp, bool)>,
    r_out: Option<TaintedBeat>,
    r_lock: Option<RSrc>,
    r_rr: usize,
    b_out: Option<TaintedB>,
    b_rr: usize,
}

#[derive(Debug, Clone)]
struct Active {
    mgr: usize,
    tr: TaintedReq,
    /// Still waiting for the peripheral to take the address.
    presented: bool,
    /// Error burst generated by the port itself.
    error: bool,
    /// W beats still to accept from the manager.
    w_left: u16,
    /// Error read beats still to emit.
    r_left: u16,
    /// Error write response already queued.
    b_sent: bool,
    overhead_left: u32,
}

#[derive(Debug, Default)]
struct SubPort {
    rq: VecDeque<(usize, TaintedReq)>,
    wq: VecDeque<(usize, TaintedReq)>,
    rr_r: Option<RoundRobin>,
    rr_w: Option<RoundRobin>,
    last_dir: Option<Dir>,
    active: Option<Active>,
    rbuf: VecDeque<(usize, TaintedBeat)>,
    bbuf: VecDeque<(usize, TaintedB)>,
    wbuf: VecDeque<(Tv, Tv, TaintSet)>,
}

const BUF_DEPTH: usize = 2;

pub struct Crossbar {
    cfg: FabricConfig,
    map: AddressMap,
    filter: Filter,
    m_out: Vec<SubordinateOut>,
    s_out: Vec<ManagerOut>,
    m_in_prefix: Vec<String>,
    s_in_prefix: Vec<String>,
    m_in: Vec<ManagerOut>,
    s_in: Vec<SubordinateOut>,
    mgr: Vec<MgrPort>,
    sub: Vec<SubPort>,
}

impl std::fmt::Debug for Crossbar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Crossbar").field("name", &self.cfg.name).field("filter", &self.filter).finish()
    }
}

impl Crossbar {
    /// `manager_inputs[i]` prefixes the signals driving manager port `i`;
    /// `sub_inputs[j]` those of the peripheral behind port `j`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        reg: &mut SignalRegistry,
        owner: usize,
        cfg: FabricConfig,
        map: AddressMap,
        manager_inputs: Vec<String>,
        sub_inputs: Vec<String>,
    ) -> Result<Self, SimError> {
        if cfg.queue_depth == 0 || cfg.pipeline == 0 {
            return Err(SimError::Config(format!("{}: queue depth and pipeline must be positive", cfg.name)));
        }
        let filter = Filter::resolve(&cfg.filter, &cfg.managers, &cfg.subordinates)?;
        let reg_kind = |_: &str| SignalKind::Registered;
        let d = ResetDomain::System;
        let m_out = (0..cfg.managers.len())
            .map(|i| SubordinateOut::register(reg, owner, &format!("{}.m{i}.", cfg.name), d, &reg_kind))
            .collect::<Result<Vec<_>, _>>()?;
        let s_out = (0..cfg.subordinates.len())
            .map(|j| ManagerOut::register(reg, owner, &format!("{}.s{j}.", cfg.name), d, &reg_kind))
            .collect::<Result<Vec<_>, _>>()?;
        let nm = cfg.managers.len();
        let sub = (0..cfg.subordinates.len())
            .map(|_| SubPort { rr_r: Some(RoundRobin::new(nm)), rr_w: Some(RoundRobin::new(nm)), ..Default::default() })
            .collect();
        Ok(Self {
            mgr: (0..nm).map(|_| MgrPort::default()).collect(),
            sub,
            cfg,
            map,
            filter,
            m_out,
            s_out,
            m_in_prefix: manager_inputs,
            s_in_prefix: sub_inputs,
            m_in: Vec::new(),
            s_in: Vec::new(),
        })
    }

    pub fn filter(&self) -> &Filter {
        &self.filter
    }

    pub fn address_map(&self) -> &AddressMap {
        &self.map
    }

    /// Requests waiting at peripheral port `j`, both directions.
    pub fn queued(&self, j: usize) -> usize {
        self.sub[j].rq.len() + self.sub[j].wq.len()
    }

    fn reset(&mut self) {
        let nm = self.mgr.len();
        for m in self.mgr.iter_mut() {
            *m = MgrPort::default();
        }
        for s in self.sub.iter_mut() {
            *s = SubPort { rr_r: Some(RoundRobin::new(nm)), rr_w: Some(RoundRobin::new(nm)), ..Default::default() };
        }
    }

    fn classify(&self, src: usize, req: &TaintedReq) -> Target {
        if req.reserved_burst {
            return Target::Local(Resp::DecErr);
        }
        if !self.filter.source_allows(src, &req.req) {
            return Target::Local(Resp::DecErr);
        }
        match self.map.decode_burst(&req.req) {
            Decode::Hit(p) => Target::Port(p),
            Decode::Miss => Target::Local(Resp::DecErr),
        }
    }

    fn observe(&mut self, cx: &mut Cx<'_>) {
        let now = cx.cycle();
        // Manager side.
        for i in 0..self.mgr.len() {
            let (inp, out) = (self.m_in[i], self.m_out[i]);
            if cx.bit(out.r_valid) && cx.bit(inp.r_ready) {
                let m = &mut self.mgr[i];
                let last = m.r_out.take().is_some_and(|b| b.is_last());
                match m.r_lock {
                    Some(RSrc::Local) => {
                        let job = m.local_r.front_mut().expect("local job");
                        job.left -= 1;
                        if job.left == 0 {
                            m.local_r.pop_front();
                        }
                    }
                    Some(RSrc::Port(_)) | None => {}
                }
                if last {
                    m.r_lock = None;
                }
            }
            if cx.bit(out.b_valid) && cx.bit(inp.b_ready) {
                self.mgr[i].b_out = None;
            }
            if cx.bit(inp.w_valid) && cx.bit(out.w_ready) {
                let beat = (cx.get(inp.w_data), cx.get(inp.w_last), cx.taint(inp.w_valid).clone());
                let m = &mut self.mgr[i];
                let (route, left) = m.w_routes.front_mut().expect("W route");
                *left -= 1;
                let (route, done) = (*route, *left == 0);
                if done {
                    m.w_routes.pop_front();
                }
                match route {
                    WRoute::Port(j) => {
                        let a = self.sub[j].active.as_mut().expect("active write");
                        a.w_left -= 1;
                        if !a.error {
                            self.sub[j].wbuf.push_back(beat);
                        }
                    }
                    WRoute::Local => {
                        if done {
                            if let Some(b) = m.local_b.iter_mut().find(|b| !b.2) {
                                b.2 = true;
                            }
                        }
                    }
                }
            }
            for dir in [Dir::Read, Dir::Write] {
                let (valid, ready) = match dir {
                    Dir::Read => (inp.ar_valid, out.ar_ready),
                    Dir::Write => (inp.aw_valid, out.aw_ready),
                };
                if cx.bit(valid) && cx.bit(ready) {
                    let tr = inp.request(cx, dir);
                    let target = self.classify(i, &tr);
                    let slot = Slot { tr, target, ready_at: now + u64::from(self.cfg.pipeline) - 1 };
                    match dir {
                        Dir::Read => self.mgr[i].ar = Some(slot),
                        Dir::Write => self.mgr[i].aw = Some(slot),
                    }
                }
            }
        }
        // Peripheral side.
        for j in 0..self.sub.len() {
            let (inp, out) = (self.s_in[j], self.s_out[j]);
            let s = &mut self.sub[j];
            if (cx.bit(out.ar_valid) && cx.bit(inp.ar_ready)) || (cx.bit(out.aw_valid) && cx.bit(inp.aw_ready)) {
                if let Some(a) = s.active.as_mut() {
                    a.presented = false;
                }
            }
            if cx.bit(out.w_valid) && cx.bit(inp.w_ready) {
                s.wbuf.pop_front();
            }
            if cx.bit(inp.r_valid) && cx.bit(out.r_ready) {
                let mut beat = inp.read_beat(cx);
                let mgr = s.active.as_ref().map_or(0, |a| a.mgr);
                if let Some(a) = s.active.as_ref() {
                    beat.id = Tv::new(u64::from(a.tr.req.id), a.tr.t.id.clone());
                }
                let last = beat.is_last();
                s.rbuf.push_back((mgr, beat));
                if last {
                    s.active = None;
                }
            }
            if cx.bit(inp.b_valid) && cx.bit(out.b_ready) {
                let mut b = inp.read_b(cx);
                let mgr = s.active.as_ref().map_or(0, |a| a.mgr);
                if let Some(a) = s.active.as_ref() {
                    b.id = Tv::new(u64::from(a.tr.req.id), a.tr.t.id.clone());
                }
                s.bbuf.push_back((mgr, b));
                s.active = None;
            }
        }
    }

    /// Moves manager slots into the per-port queues and local error jobs.
    fn route(&mut self, now: u64) {
        let depth = self.cfg.queue_depth;
        for i in 0..self.mgr.len() {
            let m = &mut self.mgr[i];
            if let Some(Slot { target: Target::Local(resp), tr, .. }) = m.ar.as_ref() {
                m.local_r.push_back(LocalRead { id: tr.req.id, left: tr.req.beats(), resp: *resp });
                m.ar = None;
            }
            if let Some(Slot { target: Target::Local(resp), tr, .. }) = m.aw.as_ref() {
                m.w_routes.push_back((WRoute::Local, tr.req.beats()));
                m.local_b.push_back((tr.req.id, *resp, false));
                m.aw = None;
            }
        }
        for j in 0..self.sub.len() {
            for dir in [Dir::Read, Dir::Write] {
                let want: Vec<bool> = self
                    .mgr
                    .iter()
                    .map(|m| {
                        let slot = match dir {
                            Dir::Read => &m.ar,
                            Dir::Write => &m.aw,
                        };
                        // Writes stay on one port at a time so W beats follow AW order.
                        let w_ok = dir == Dir::Read
                            || m.w_routes.iter().all(|(r, _)| matches!(r, WRoute::Local) || *r == WRoute::Port(j));
                        w_ok && slot.as_ref().is_some_and(|s| s.target == Target::Port(j) && s.ready_at <= now)
                    })
                    .collect();
                let s = &mut self.sub[j];
                let (q, rr) = match dir {
                    Dir::Read => (&mut s.rq, s.rr_r.as_mut().expect("arbiter")),
                    Dir::Write => (&mut s.wq, s.rr_w.as_mut().expect("arbiter")),
                };
                if q.len() >= depth || !want.iter().any(|&w| w) {
                    continue;
                }
                let g = rr.arbitrate(&want).expect("non-empty");
                let slot = match dir {
                    Dir::Read => self.mgr[g].ar.take(),
                    Dir::Write => self.mgr[g].aw.take(),
                }
                .expect("granted slot");
                if dir == Dir::Write {
                    self.mgr[g].w_routes.push_back((WRoute::Port(j), slot.tr.req.beats()));
                }
                q.push_back((g, slot.tr));
            }
        }
    }

    /// Starts the next burst on idle ports and advances port-generated errors.
    fn serve(&mut self) {
        for j in 0..self.sub.len() {
            let forbids = |req: &AxiRequest| self.filter.port_forbids(j, req);
            let overhead = match self.filter {
                Filter::Peripheral { overhead, .. } => overhead,
                _ => 0,
            };
            let s = &mut self.sub[j];
            if s.active.is_none() {
                let order = match s.last_dir {
                    Some(Dir::Read) => [Dir::Write, Dir::Read],
                    _ => [Dir::Read, Dir::Write],
                };
                for dir in order {
                    let q = match dir {
                        Dir::Read => &mut s.rq,
                        Dir::Write => &mut s.wq,
                    };
                    if let Some((mgr, tr)) = q.pop_front() {
                        let error = forbids(&tr.req);
                        let beats = tr.req.beats();
                        s.active = Some(Active {
                            mgr,
                            presented: !error,
                            error,
                            w_left: if dir == Dir::Write { beats } else { 0 },
                            r_left: if dir == Dir::Read && error { beats } else { 0 },
                            b_sent: false,
                            overhead_left: overhead,
                            tr,
                        });
                        s.last_dir = Some(dir);
                        break;
                    }
                }
            }
            // Port-generated error bursts.
            let Some(a) = s.active.as_mut() else { continue };
            if !a.error {
                continue;
            }
            let origin = TaintSet::new();
            match a.tr.req.dir {
                Dir::Read => {
                    if a.r_left > 0 {
                        if s.rbuf.len() < BUF_DEPTH {
                            a.r_left -= 1;
                            let b = TaintedBeat {
                                id: Tv::new(u64::from(a.tr.req.id), origin.clone()),
                                data: Tv::new(0, origin.clone()),
                                resp: Tv::new(Resp::SlvErr.encode(), origin.clone()),
                                last: Tv::new(u64::from(a.r_left == 0), origin.clone()),
                                valid: origin,
                            };
                            s.rbuf.push_back((a.mgr, b));
                        }
                    } else if a.overhead_left > 0 {
                        a.overhead_left -= 1;
                    }
                    if a.r_left == 0 && a.overhead_left == 0 {
                        s.active = None;
                    }
                }
                Dir::Write => {
                    if a.w_left == 0 && !a.b_sent && s.bbuf.len() < BUF_DEPTH {
                        let b = TaintedB {
                            id: Tv::new(u64::from(a.tr.req.id), origin.clone()),
                            resp: Tv::new(Resp::SlvErr.encode(), origin.clone()),
                            valid: origin,
                        };
                        s.bbuf.push_back((a.mgr, b));
                        a.b_sent = true;
                    } else if a.b_sent && a.overhead_left > 0 {
                        a.overhead_left -= 1;
                    }
                    if a.b_sent && a.overhead_left == 0 {
                        s.active = None;
                    }
                }
            }
        }
    }

    /// Fills empty manager-side R/B output registers.
    fn respond(&mut self) {
        let nsub = self.sub.len();
        for i in 0..self.mgr.len() {
            let m = &mut self.mgr[i];
            if m.r_out.is_none() {
                let pick = match m.r_lock {
                    Some(src) => Some(src),
                    None => {
                        let n = nsub + 1;
                        (1..=n).map(|k| (m.r_rr + k) % n).find_map(|c| {
                            if c < nsub {
                                self.sub[c].rbuf.front().filter(|(o, _)| *o == i).map(|_| RSrc::Port(c))
                            } else {
                                m.local_r.front().map(|_| RSrc::Local)
                            }
                        })
                    }
                };
                match pick {
                    Some(RSrc::Port(j)) => {
                        if self.sub[j].rbuf.front().is_some_and(|(o, _)| *o == i) {
                            let (_, b) = self.sub[j].rbuf.pop_front().expect("beat");
                            m.r_lock = if b.is_last() { None } else { Some(RSrc::Port(j)) };
                            m.r_out = Some(b);
                            m.r_rr = j;
                        }
                    }
                    Some(RSrc::Local) => {
                        if let Some(job) = m.local_r.front() {
                            let last = job.left == 1;
                            let t = TaintSet::new();
                            m.r_out = Some(TaintedBeat {
                                id: Tv::new(u64::from(job.id), t.clone()),
                                data: Tv::new(0, t.clone()),
                                resp: Tv::new(job.resp.encode(), t.clone()),
                                last: Tv::new(u64::from(last), t.clone()),
                                valid: t,
                            });
                            m.r_lock = Some(RSrc::Local);
                            m.r_rr = nsub;
                        }
                    }
                    None => {}
                }
            }
            if m.b_out.is_none() {
                let n = nsub + 1;
                let pick = (1..=n).map(|k| (m.b_rr + k) % n).find(|&c| {
                    if c < nsub {
                        self.sub[c].bbuf.front().is_some_and(|(o, _)| *o == i)
                    } else {
                        m.local_b.front().is_some_and(|b| b.2)
                    }
                });
                if let Some(c) = pick {
                    m.b_rr = c;
                    if c < nsub {
                        m.b_out = self.sub[c].bbuf.pop_front().map(|(_, b)| b);
                    } else {
                        let (id, resp, _) = m.local_b.pop_front().expect("local b");
                        m.b_out = Some(TaintedB {
                            id: Tv::clean(u64::from(id)),
                            resp: Tv::clean(resp.encode()),
                            valid: TaintSet::new(),
                        });
                    }
                }
            }
        }
    }

    fn drive(&mut self, cx: &mut Cx<'_>) {
        let strip_ids = matches!(self.filter, Filter::Peripheral { .. });
        for i in 0..self.mgr.len() {
            let out = self.m_out[i];
            let m = &self.mgr[i];
            cx.set_clean(out.ar_ready, u64::from(m.ar.is_none()));
            cx.set_clean(out.aw_ready, u64::from(m.aw.is_none()));
            let w_ready = match m.w_routes.front() {
                Some((WRoute::Local, _)) => true,
                Some((WRoute::Port(j), _)) => {
                    let s = &self.sub[*j];
                    s.active.as_ref().is_some_and(|a| {
                        a.mgr == i && a.tr.req.dir == Dir::Write && a.w_left > 0 && (a.error || !a.presented)
                    }) && s.wbuf.len() < BUF_DEPTH
                }
                None => false,
            };
            cx.set_clean(out.w_ready, u64::from(w_ready));
            out.drive_beat(cx, m.r_out.as_ref());
            out.drive_b(cx, m.b_out.as_ref());
        }
        for j in 0..self.sub.len() {
            let out = self.s_out[j];
            let s = &self.sub[j];
            let presented = s.active.as_ref().filter(|a| a.presented).map(|a| {
                let mut tr = a.tr.clone();
                if strip_ids {
                    tr.req.id = 0;
                    tr.t.id = TaintSet::new();
                }
                tr
            });
            let pick = |d: Dir| presented.as_ref().filter(|t| t.req.dir == d);
            out.drive_request(cx, Dir::Read, pick(Dir::Read));
            out.drive_request(cx, Dir::Write, pick(Dir::Write));
            match s.wbuf.front() {
                Some((data, last, valid)) => {
                    cx.set_tv(out.w_data, data.clone());
                    cx.set_tv(out.w_last, last.clone());
                    cx.set(out.w_valid, 1, valid.clone());
                }
                None => {
                    for id in [out.w_data, out.w_last, out.w_valid] {
                        cx.clear(id);
                    }
                }
            }
            cx.set_clean(out.r_ready, u64::from(s.rbuf.len() < BUF_DEPTH));
            cx.set_clean(out.b_ready, u64::from(s.bbuf.len() < BUF_DEPTH));
        }
    }
}

impl Component for Crossbar {
    fn name(&self) -> &str {
        &self.cfg.name
    }

    fn bind(&mut self, reg: &SignalRegistry) -> Result<(), SimError> {
        self.m_in = self.m_in_prefix.iter().map(|p| ManagerOut::bind(reg, p)).collect::<Result<_, _>>()?;
        self.s_in = self.s_in_prefix.iter().map(|p| SubordinateOut::bind(reg, p)).collect::<Result<_, _>>()?;
        Ok(())
    }

    fn tick(&mut self, cx: &mut Cx<'_>) {
        if cx.in_reset() {
            self.reset();
            for out in self.m_out.clone() {
                for id in out.ids() {
                    cx.clear(id);
                }
            }
            for out in self.s_out.clone() {
                for id in out.ids() {
                    cx.clear(id);
                }
            }
            return;
        }
        let now = cx.cycle();
        self.observe(cx);
        self.route(now);
        self.serve();
        self.respond();
        self.drive(cx);
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}
