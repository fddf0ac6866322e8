// SPDX-License-Identifier: Apache-2.0

//! Access control wrapper placed between one controller and the fabric.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::axi::{burst_footprint, AxiRequest, Dir, ManagerOut, ReqTaint, Resp, SubordinateOut, TaintedReq};
use crate::kernel::{
    register, Component, Cx, ResetDomain, SignalId, SignalKind, SignalRegistry, SimError, TaintSet, Tv,
};

/// Operating mode of one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Reset,
    Supervising,
    Decouple,
}

impl Mode {
    pub fn encode(self) -> u64 {
        match self {
            Mode::Reset => 0b00,
            Mode::Supervising => 0b01,
            Mode::Decouple => 0b10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Region {
    pub base: u64,
    pub size: u64,
}

impl Region {
    pub fn new(base: u64, size: u64) -> Self {
        Self { base, size }
    }

    /// A region with size zero is disabled.
    pub fn enabled(&self) -> bool {
        self.size != 0
    }

    pub fn end(&self) -> u64 {
        self.base.saturating_add(self.size)
    }

    pub fn contains_range(&self, lo: u64, hi: u64) -> bool {
        self.enabled() && lo >= self.base && hi <= self.end()
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        self.enabled() && other.enabled() && self.base < other.end() && other.base < self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Lacp {
    pub read: Vec<Region>,
    pub write: Vec<Region>,
}

impl Lacp {
    pub fn new(read: Vec<Region>, write: Vec<Region>) -> Self {
        Self { read, write }
    }

    pub fn regions(&self, dir: Dir) -> &[Region] {
        match dir {
            Dir::Read => &self.read,
            Dir::Write => &self.write,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Legal,
    Illegal,
}

/// Legal iff the whole footprint sits inside one enabled region of the
/// matching direction. Malformed requests are illegal.
pub fn check_legal(lacp: &Lacp, req: &AxiRequest) -> Verdict {
    let Ok(fp) = burst_footprint(req) else { return Verdict::Illegal };
    if lacp.regions(req.dir).iter().any(|r| r.contains_range(fp.lo, fp.hi)) {
        Verdict::Legal
    } else {
        Verdict::Illegal
    }
}

/// Injected behavioral faults used to validate the property suites.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fault {
    SkipRegionCheck,
    NoResetClear,
    ForwardInReset,
    NoInterrupt,
    AnomalyWritableByController,
    ConfigWritableByController,
}

impl Fault {
    pub const ALL: [Fault; 6] = [
        Fault::SkipRegionCheck,
        Fault::NoResetClear,
        Fault::ForwardInReset,
        Fault::NoInterrupt,
        Fault::AnomalyWritableByController,
        Fault::ConfigWritableByController,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Fault::SkipRegionCheck => "skip-region-check",
            Fault::NoResetClear => "no-reset-clear",
            Fault::ForwardInReset => "forward-in-reset",
            Fault::NoInterrupt => "no-interrupt",
            Fault::AnomalyWritableByController => "anomaly-writable",
            Fault::ConfigWritableByController => "config-writable",
        }
    }

    pub fn from_id(s: &str) -> Option<Fault> {
        Self::ALL.into_iter().find(|f| f.id() == s)
    }
}

/// Register map, as byte offsets of 32-bit words.
pub mod regs {
    pub const CTRL: u64 = 0x00;
    pub const STATUS: u64 = 0x04;
    pub const ANOMALY_ADDR_LO: u64 = 0x08;
    pub const ANOMALY_ADDR_HI: u64 = 0x0c;
    pub const ANOMALY_META: u64 = 0x10;
    pub const ANOMALY_CYCLE_LO: u64 = 0x14;
    pub const ANOMALY_CYCLE_HI: u64 = 0x18;
    pub const REGIONS: u64 = 0x20;

    pub const CTRL_VALID: u64 = 1 << 0;
    pub const CTRL_READMIT_R: u64 = 1 << 1;
    pub const CTRL_READMIT_W: u64 = 1 << 2;

    pub const ANOMALY: [u64; 5] = [ANOMALY_ADDR_LO, ANOMALY_ADDR_HI, ANOMALY_META, ANOMALY_CYCLE_LO, ANOMALY_CYCLE_HI];
    pub const ANOMALY_NAMES: [&str; 5] = ["addr_lo", "addr_hi", "meta", "cycle_lo", "cycle_hi"];
    pub const REGION_FIELDS: [&str; 4] = ["base_lo", "base_hi", "size_lo", "size_hi"];

    /// Byte offset of word `field` of region `i` in direction `write`.
    pub fn region(n_read: usize, write: bool, i: usize, field: usize) -> u64 {
        let slot = if write { n_read + i } else { i };
        REGIONS + 16 * slot as u64 + 4 * field as u64
    }
}

/// Packs request metadata into the anomaly `meta` word.
pub fn pack_meta(req: &AxiRequest) -> u64 {
    u64::from(req.len)
        | u64::from(req.size) << 8
        | req.burst.encode() << 11
        | u64::from(req.dir == Dir::Write) << 13
        | u64::from(req.id) << 16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Actor {
    Te,
    Controller,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CfgError {
    #[error("offset {0:#x} outside the register map")]
    OutOfMap(u64),
    #[error("write to {0:#x} from a non-trusted source")]
    Unauthorized(u64),
    #[error("register {0:#x} is read-only")]
    ReadOnly(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedWrite {
    pub offset: u64,
    pub value: u64,
    pub source: Actor,
}

/// Register file and mode machines, free of any signal plumbing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcwState {
    pub n_read: usize,
    pub n_write: usize,
    pub r_state: Mode,
    pub w_state: Mode,
    /// Visible registers, one per word offset.
    pub regs: Vec<Tv>,
    /// Region words written by the TE before the policy is validated.
    pub staging: Vec<Tv>,
    pub outstanding_r: u32,
    pub outstanding_w: u32,
    pub rejected: Vec<RejectedWrite>,
}

impl AcwState {
    pub fn new(n_read: usize, n_write: usize) -> Self {
        let words = Self::map_words(n_read, n_write);
        Self {
            n_read,
            n_write,
            r_state: Mode::Reset,
            w_state: Mode::Reset,
            regs: vec![Tv::default(); words],
            staging: vec![Tv::default(); words],
            outstanding_r: 0,
            outstanding_w: 0,
            rejected: Vec::new(),
        }
    }

    fn map_words(n_read: usize, n_write: usize) -> usize {
        (regs::REGIONS / 4) as usize + 4 * (n_read + n_write)
    }

    pub fn map_bytes(&self) -> u64 {
        4 * Self::map_words(self.n_read, self.n_write) as u64
    }

    pub fn state(&self, dir: Dir) -> Mode {
        match dir {
            Dir::Read => self.r_state,
            Dir::Write => self.w_state,
        }
    }

    pub fn intr(&self, dir: Dir) -> bool {
        self.state(dir) == Mode::Decouple
    }

    fn word(&self, offset: u64) -> Result<usize, CfgError> {
        let w = (offset / 4) as usize;
        if !offset.is_multiple_of(4) || offset == 0x1c || w >= self.regs.len() {
            return Err(CfgError::OutOfMap(offset));
        }
        Ok(w)
    }

    fn region_dir(&self, w: usize) -> Option<Dir> {
        let first = (regs::REGIONS / 4) as usize;
        if w < first {
            None
        } else if w < first + 4 * self.n_read {
            Some(Dir::Read)
        } else {
            Some(Dir::Write)
        }
    }

    /// The policy currently enforced.
    pub fn lacp(&self) -> Lacp {
        let region = |write: bool, i: usize| {
            let w = |f| (regs::region(self.n_read, write, i, f) / 4) as usize;
            let lohi = |a: usize, b: usize| (self.regs[a].v & 0xffff_ffff) | (self.regs[b].v & 0xffff_ffff) << 32;
            Region::new(lohi(w(0), w(1)), lohi(w(2), w(3)))
        };
        Lacp::new(
            (0..self.n_read).map(|i| region(false, i)).collect(),
            (0..self.n_write).map(|i| region(true, i)).collect(),
        )
    }

    pub fn busy(&self, dir: Dir) -> bool {
        match dir {
            Dir::Read => self.outstanding_r > 0,
            Dir::Write => self.outstanding_w > 0,
        }
    }

    pub fn status(&self) -> u64 {
        self.r_state.encode() | self.w_state.encode() << 2
    }

    pub fn anomaly(&self) -> [u64; 5] {
        regs::ANOMALY.map(|o| self.regs[(o / 4) as usize].v)
    }

    pub fn cfg_write(&mut self, offset: u64, value: Tv, source: Actor) -> Result<(), CfgError> {
        let w = self.word(offset)?;
        if source != Actor::Te {
            self.rejected.push(RejectedWrite { offset, value: value.v, source });
            return Err(CfgError::Unauthorized(offset));
        }
        self.write_word(w, value)
    }

    /// Applies a write without the source check. Only faulty builds call
    /// this for controller-originated data.
    pub fn write_word(&mut self, w: usize, value: Tv) -> Result<(), CfgError> {
        let offset = 4 * w as u64;
        let value = Tv::new(value.v & 0xffff_ffff, value.t);
        match offset {
            regs::CTRL => {
                let v = value.v;
                if v & regs::CTRL_VALID != 0 && self.r_state == Mode::Reset && self.w_state == Mode::Reset {
                    let first = (regs::REGIONS / 4) as usize;
                    self.regs[first..].clone_from_slice(&self.staging[first..]);
                    self.r_state = Mode::Supervising;
                    self.w_state = Mode::Supervising;
                }
                if v & regs::CTRL_VALID != 0 && self.r_state != Mode::Reset {
                    self.regs[0] = Tv::new(regs::CTRL_VALID, value.t);
                }
                if v & regs::CTRL_READMIT_R != 0 && self.r_state == Mode::Decouple {
                    self.r_state = Mode::Supervising;
                    self.clear_anomaly();
                }
                if v & regs::CTRL_READMIT_W != 0 && self.w_state == Mode::Decouple {
                    self.w_state = Mode::Supervising;
                    self.clear_anomaly();
                }
                Ok(())
            }
            regs::STATUS => Err(CfgError::ReadOnly(offset)),
            o if regs::ANOMALY.contains(&o) => Err(CfgError::ReadOnly(offset)),
            _ => {
                let dir = self.region_dir(w).expect("region word");
                self.staging[w] = value.clone();
                if self.state(dir) != Mode::Reset {
                    self.regs[w] = value;
                }
                Ok(())
            }
        }
    }

    /// Faulty anomaly write path.
    pub fn poke_anomaly(&mut self, offset: u64, value: Tv) -> bool {
        if regs::ANOMALY.contains(&offset) {
            self.regs[(offset / 4) as usize] = Tv::new(value.v & 0xffff_ffff, value.t);
            true
        } else {
            false
        }
    }

    pub fn cfg_read(&self, offset: u64) -> Result<Tv, CfgError> {
        let w = self.word(offset)?;
        if offset == regs::STATUS {
            return Ok(Tv::clean(self.status()));
        }
        Ok(self.regs[w].clone())
    }

    fn clear_anomaly(&mut self) {
        for o in regs::ANOMALY {
            self.regs[(o / 4) as usize] = Tv::default();
        }
    }

    /// Records an illegal request and decouples its direction.
    pub fn capture(&mut self, req: &AxiRequest, t: &ReqTaint, cycle: u64) {
        let tv = |v: u64, t: TaintSet| Tv::new(v & 0xffff_ffff, t);
        let meta_t = crate::kernel::union_all([&t.id, &t.len, &t.size, &t.burst, &t.valid]);
        let addr_t = t.addr.union(&t.valid);
        let words = [
            tv(req.addr, addr_t.clone()),
            tv(req.addr >> 32, addr_t),
            tv(pack_meta(req), meta_t),
            tv(cycle, t.valid.clone()),
            tv(cycle >> 32, t.valid.clone()),
        ];
        for (o, v) in regs::ANOMALY.iter().zip(words) {
            self.regs[(o / 4) as usize] = v;
        }
        match req.dir {
            Dir::Read => self.r_state = Mode::Decouple,
            Dir::Write => self.w_state = Mode::Decouple,
        }
    }

    /// Supervising-mode decision for one request; decouples on a violation.
    pub fn on_request(&mut self, req: &AxiRequest, t: &ReqTaint, cycle: u64) -> Verdict {
        let v = check_legal(&self.lacp(), req);
        match v {
            Verdict::Legal => match req.dir {
                Dir::Read => self.outstanding_r += 1,
                Dir::Write => self.outstanding_w += 1,
            },
            Verdict::Illegal => self.capture(req, t, cycle),
        }
        v
    }

    /// Back to power-on defaults. With `keep_regs` the register contents
    /// survive (fault model only).
    pub fn reset(&mut self, keep_regs: bool) {
        let fresh = Self::new(self.n_read, self.n_write);
        let (regs, staging, rejected) =
            (std::mem::take(&mut self.regs), std::mem::take(&mut self.staging), std::mem::take(&mut self.rejected));
        *self = fresh;
        self.rejected = rejected;
        if keep_regs {
            self.regs = regs;
            self.staging = staging;
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(default)]
pub struct AcwConfig {
    pub n_read: usize,
    pub n_write: usize,
    /// Decouple both directions when either one sees a violation.
    pub strict_decouple: bool,
    #[doc(hidden)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
    /// Base of the register window reachable from the controller in
    /// faulty builds.
    #[doc(hidden)]
    pub aperture: u64,
}

impl Default for AcwConfig {
    fn default() -> Self {
        Self { n_read: 4, n_write: 4, strict_decouple: false, fault: None, aperture: 0xF000_0000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RouteKind {
    Forward,
    Discard,
    Register(u64),
}

#[derive(Debug, Clone, Copy)]
struct WRoute {
    kind: RouteKind,
    left: u16,
    id: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Src {
    Fabric,
    Error,
    Local,
}

#[derive(Debug, Clone)]
struct ErrJob {
    req: AxiRequest,
    left: u16,
    /// All W beats of an illegal write have been discarded.
    armed: bool,
}

#[derive(Debug, Clone, Copy)]
struct CfgPort {
    wen: SignalId,
    waddr: SignalId,
    wdata: SignalId,
    ren: SignalId,
    raddr: SignalId,
}

/// Names of the TE-facing configuration port signals under `prefix`.
pub const CFG_PORT_SIGNALS: [(&str, u8); 5] = [("wen", 1), ("waddr", 16), ("wdata", 32), ("ren", 1), ("raddr", 16)];

#[derive(Debug)]
pub struct Acw {
    name: String,
    cfg: AcwConfig,
    ctrl_prefix: String,
    fabric_prefix: String,
    te_prefix: Option<String>,
    origin: TaintSet,

    st: AcwState,
    ar_slot: Option<TaintedReq>,
    aw_slot: Option<TaintedReq>,
    r_err: Option<ErrJob>,
    b_err: Option<ErrJob>,
    /// IDs of finished register writes awaiting their B response.
    b_local: VecDeque<u16>,
    w_routes: VecDeque<WRoute>,
    r_lock: Option<Src>,
    r_sel: Option<Src>,
    b_sel: Option<Src>,

    m: SubordinateOut,
    s: ManagerOut,
    r_state: SignalId,
    w_state: SignalId,
    intr_r: SignalId,
    intr_w: SignalId,
    reg_sigs: Vec<Option<SignalId>>,
    cfgp_rdata: SignalId,
    cfgp_rvalid: SignalId,

    c_in: Option<ManagerOut>,
    f_in: Option<SubordinateOut>,
    te_in: Option<CfgPort>,
}

fn m_kind(f: &str) -> SignalKind {
    if f == "ARREADY" || f == "AWREADY" {
        SignalKind::Registered
    } else {
        SignalKind::Comb
    }
}

fn s_kind(f: &str) -> SignalKind {
    if f.starts_with("AR") || f.starts_with("AW") {
        SignalKind::Registered
    } else {
        SignalKind::Comb
    }
}

/// Signal-name suffix of register word `w`, if it is exposed.
fn reg_name(n_read: usize, w: usize) -> Option<String> {
    let off = 4 * w as u64;
    match off {
        regs::CTRL => Some("cfg.ctrl".into()),
        regs::STATUS => Some("cfg.status".into()),
        o if regs::ANOMALY.contains(&o) => {
            let i = regs::ANOMALY.iter().position(|&x| x == o).unwrap();
            Some(format!("anomaly.{}", regs::ANOMALY_NAMES[i]))
        }
        o if o >= regs::REGIONS => {
            let slot = ((o - regs::REGIONS) / 16) as usize;
            let field = ((o - regs::REGIONS) % 16 / 4) as usize;
            let (d, i) = if slot < n_read { ("rd", slot) } else { ("wr", slot - n_read) };
            Some(format!("cfg.{d}{i}_{}", regs::REGION_FIELDS[field]))
        }
        _ => None,
    }
}

impl Acw {
    /// Registers the wrapper's outputs. `ctrl_prefix` and `fabric_prefix`
    /// name the controller's outputs and the fabric port facing this
    /// wrapper; `te_prefix` the trusted entity's configuration port.
    pub fn new(
        reg: &mut SignalRegistry,
        owner: usize,
        name: &str,
        cfg: AcwConfig,
        ctrl_prefix: &str,
        fabric_prefix: &str,
        te_prefix: Option<&str>,
    ) -> Result<Self, SimError> {
        for n in [cfg.n_read, cfg.n_write] {
            if !matches!(n, 1..=16) {
                return Err(SimError::Config(format!("{name}: region count {n} outside 1..=16")));
            }
        }
        let d = ResetDomain::System;
        let m = SubordinateOut::register(reg, owner, &format!("{name}.m."), d, &m_kind)?;
        let s = ManagerOut::register(reg, owner, &format!("{name}.s."), d, &s_kind)?;
        let r = SignalKind::Registered;
        let r_state = register(reg, owner, format!("{name}.r_state"), 2, r, d)?;
        let w_state = register(reg, owner, format!("{name}.w_state"), 2, r, d)?;
        let intr_r = register(reg, owner, format!("{name}.intr_r"), 1, r, d)?;
        let intr_w = register(reg, owner, format!("{name}.intr_w"), 1, r, d)?;
        let st = AcwState::new(cfg.n_read, cfg.n_write);
        let reg_sigs = (0..st.regs.len())
            .map(|w| reg_name(cfg.n_read, w).map(|n| register(reg, owner, format!("{name}.{n}"), 32, r, d)).transpose())
            .collect::<Result<Vec<_>, _>>()?;
        let cfgp_rdata = register(reg, owner, format!("{name}.cfgp.rdata"), 32, r, d)?;
        let cfgp_rvalid = register(reg, owner, format!("{name}.cfgp.rvalid"), 1, r, d)?;
        Ok(Self {
            name: name.to_string(),
            cfg,
            ctrl_prefix: ctrl_prefix.to_string(),
            fabric_prefix: fabric_prefix.to_string(),
            te_prefix: te_prefix.map(str::to_string),
            origin: TaintSet::new(),
            st,
            ar_slot: None,
            aw_slot: None,
            r_err: None,
            b_err: None,
            b_local: VecDeque::new(),
            w_routes: VecDeque::new(),
            r_lock: None,
            r_sel: None,
            b_sel: None,
            m,
            s,
            r_state,
            w_state,
            intr_r,
            intr_w,
            reg_sigs,
            cfgp_rdata,
            cfgp_rvalid,
            c_in: None,
            f_in: None,
            te_in: None,
        })
    }

    pub fn state(&self) -> &AcwState {
        &self.st
    }

    pub fn config(&self) -> &AcwConfig {
        &self.cfg
    }

    /// Label attached to error payloads generated by this wrapper.
    pub fn set_origin(&mut self, t: TaintSet) {
        self.origin = t;
    }

    pub fn busy(&self, dir: Dir) -> bool {
        match dir {
            Dir::Read => self.st.outstanding_r > 0 || self.r_err.is_some() || self.ar_slot.is_some(),
            Dir::Write => {
                self.st.outstanding_w > 0
                    || self.b_err.is_some()
                    || self.aw_slot.is_some()
                    || !self.b_local.is_empty()
                    || !self.w_routes.is_empty()
            }
        }
    }

    fn status_word(&self) -> u64 {
        self.st.status() | u64::from(self.busy(Dir::Read)) << 4 | u64::from(self.busy(Dir::Write)) << 5
    }

    fn fault(&self, f: Fault) -> bool {
        self.cfg.fault == Some(f)
    }

    fn forwards(&self, dir: Dir, in_reset: bool) -> bool {
        let mode = self.st.state(dir);
        let other = self.st.state(match dir {
            Dir::Read => Dir::Write,
            Dir::Write => Dir::Read,
        });
        if self.fault(Fault::ForwardInReset) && (in_reset || mode == Mode::Reset) {
            return true;
        }
        if in_reset {
            return false;
        }
        mode == Mode::Supervising && !(self.cfg.strict_decouple && other == Mode::Decouple)
    }

    fn in_aperture(&self, addr: u64) -> bool {
        matches!(self.cfg.fault, Some(Fault::AnomalyWritableByController | Fault::ConfigWritableByController))
            && addr >= self.cfg.aperture
            && addr < self.cfg.aperture + self.st.map_bytes()
    }

    fn reset_all(&mut self) {
        self.st.reset(self.fault(Fault::NoResetClear));
        self.ar_slot = None;
        self.aw_slot = None;
        self.r_err = None;
        self.b_err = None;
        self.b_local.clear();
        self.w_routes.clear();
        self.r_lock = None;
        self.r_sel = None;
        self.b_sel = None;
    }

    fn te_op(&mut self, cx: &mut Cx<'_>) {
        let Some(p) = self.te_in else {
            cx.clear(self.cfgp_rdata);
            cx.clear(self.cfgp_rvalid);
            return;
        };
        if cx.bit(p.wen) {
            let off = cx.val(p.waddr);
            if let Err(e) = self.st.cfg_write(off, cx.get(p.wdata), Actor::Te) {
                cx.violation(format!("{}: {e}", self.name));
            }
        }
        if cx.bit(p.ren) {
            let off = cx.val(p.raddr);
            let v = if off == regs::STATUS { Ok(Tv::clean(self.status_word())) } else { self.st.cfg_read(off) };
            match v {
                Ok(tv) => {
                    cx.set_tv(self.cfgp_rdata, tv);
                    cx.set_clean(self.cfgp_rvalid, 1);
                }
                Err(e) => {
                    cx.violation(format!("{}: {e}", self.name));
                    cx.clear(self.cfgp_rdata);
                    cx.set_clean(self.cfgp_rvalid, 1);
                }
            }
        } else {
            cx.clear(self.cfgp_rdata);
            cx.clear(self.cfgp_rvalid);
        }
    }

    fn accept(&mut self, cx: &Cx<'_>, tr: TaintedReq, in_reset: bool) {
        let dir = tr.req.dir;
        if dir == Dir::Write && self.in_aperture(tr.req.addr) {
            let base = tr.req.addr - self.cfg.aperture;
            self.w_routes.push_back(WRoute { kind: RouteKind::Register(base), left: tr.req.beats(), id: tr.req.id });
            return;
        }
        let unchecked = self.fault(Fault::SkipRegionCheck)
            || (self.fault(Fault::ForwardInReset) && (in_reset || self.st.state(dir) == Mode::Reset));
        let legal = if unchecked {
            match dir {
                Dir::Read => self.st.outstanding_r += 1,
                Dir::Write => self.st.outstanding_w += 1,
            }
            Verdict::Legal
        } else if tr.reserved_burst {
            self.st.capture(&tr.req, &tr.t, cx.cycle() - 1);
            Verdict::Illegal
        } else {
            self.st.on_request(&tr.req, &tr.t, cx.cycle() - 1)
        };
        let beats = tr.req.beats();
        match (dir, legal) {
            (Dir::Read, Verdict::Legal) => self.ar_slot = Some(tr),
            (Dir::Write, Verdict::Legal) => {
                self.w_routes.push_back(WRoute { kind: RouteKind::Forward, left: beats, id: tr.req.id });
                self.aw_slot = Some(tr);
            }
            (Dir::Read, Verdict::Illegal) => {
                self.r_err = Some(ErrJob { req: tr.req, left: beats, armed: true });
            }
            (Dir::Write, Verdict::Illegal) => {
                self.w_routes.push_back(WRoute { kind: RouteKind::Discard, left: beats, id: tr.req.id });
                self.b_err = Some(ErrJob { req: tr.req, left: 1, armed: false });
            }
        }
    }

    fn w_beat(&mut self, cx: &mut Cx<'_>, c: &ManagerOut) {
        let Some(route) = self.w_routes.front_mut() else { return };
        route.left -= 1;
        let kind = route.kind;
        let id = route.id;
        let done = route.left == 0;
        if let RouteKind::Register(off) = kind {
            let data = cx.get(c.w_data);
            let data = Tv::new(data.v, data.t.union(cx.taint(c.w_valid)));
            let applied = match self.cfg.fault {
                Some(Fault::AnomalyWritableByController) => self.st.poke_anomaly(off, data),
                Some(Fault::ConfigWritableByController) => {
                    let w = (off / 4) as usize;
                    let cfg_word = off == regs::CTRL || off >= regs::REGIONS;
                    cfg_word && w < self.st.regs.len() && self.st.write_word(w, data).is_ok()
                }
                _ => false,
            };
            if !applied {
                cx.violation(format!("{}: controller write to {off:#x} ignored", self.name));
            }
        }
        if done {
            self.w_routes.pop_front();
            match kind {
                RouteKind::Discard => {
                    if let Some(j) = self.b_err.as_mut() {
                        j.armed = true;
                    }
                }
                RouteKind::Register(_) => self.b_local.push_back(id),
                RouteKind::Forward => {}
            }
        }
    }

    fn drive_registered(&mut self, cx: &mut Cx<'_>, in_reset: bool) {
        let s = self.s;
        s.drive_request(cx, Dir::Read, self.ar_slot.as_ref());
        s.drive_request(cx, Dir::Write, self.aw_slot.as_ref());
        let ar_ready = self.forwards(Dir::Read, in_reset) && self.ar_slot.is_none() && self.r_err.is_none();
        let aw_ready = self.forwards(Dir::Write, in_reset) && self.aw_slot.is_none() && self.b_err.is_none();
        cx.set_clean(self.m.ar_ready, u64::from(ar_ready));
        cx.set_clean(self.m.aw_ready, u64::from(aw_ready));
        cx.set_clean(self.r_state, self.st.r_state.encode());
        cx.set_clean(self.w_state, self.st.w_state.encode());
        let no_intr = self.fault(Fault::NoInterrupt);
        cx.set_clean(self.intr_r, u64::from(self.st.intr(Dir::Read) && !no_intr));
        cx.set_clean(self.intr_w, u64::from(self.st.intr(Dir::Write) && !no_intr));
        let status = self.status_word();
        for (w, sig) in self.reg_sigs.iter().enumerate() {
            let Some(sig) = *sig else { continue };
            if 4 * w as u64 == regs::STATUS {
                cx.set_clean(sig, status);
            } else {
                cx.set_tv(sig, self.st.regs[w].clone());
            }
        }
    }
}

impl Component for Acw {
    fn name(&self) -> &str {
        &self.name
    }

    fn bind(&mut self, reg: &SignalRegistry) -> Result<(), SimError> {
        self.c_in = Some(ManagerOut::bind(reg, &self.ctrl_prefix)?);
        self.f_in = Some(SubordinateOut::bind(reg, &self.fabric_prefix)?);
        if let Some(p) = &self.te_prefix {
            let id = |f: &str| reg.id(&format!("{p}{f}"));
            self.te_in = Some(CfgPort {
                wen: id("wen")?,
                waddr: id("waddr")?,
                wdata: id("wdata")?,
                ren: id("ren")?,
                raddr: id("raddr")?,
            });
        }
        Ok(())
    }

    fn tick(&mut self, cx: &mut Cx<'_>) {
        let (c, f) = (self.c_in.expect("bound"), self.f_in.expect("bound"));
        let in_reset = cx.in_reset();

        // Handshakes of the previous cycle.
        let ar_fire = cx.bit(c.ar_valid) && cx.bit(self.m.ar_ready);
        let aw_fire = cx.bit(c.aw_valid) && cx.bit(self.m.aw_ready);
        let w_fire = cx.bit(c.w_valid) && cx.bit(self.m.w_ready);
        let r_fire = cx.bit(self.m.r_valid) && cx.bit(c.r_ready);
        let r_last = cx.bit(self.m.r_last);
        let b_fire = cx.bit(self.m.b_valid) && cx.bit(c.b_ready);
        let s_ar_fire = cx.bit(self.s.ar_valid) && cx.bit(f.ar_ready);
        let s_aw_fire = cx.bit(self.s.aw_valid) && cx.bit(f.aw_ready);

        // Pick up taint added to the register signals since the last commit.
        for (w, sig) in self.reg_sigs.iter().enumerate() {
            if let Some(sig) = *sig {
                if 4 * w as u64 != regs::STATUS {
                    self.st.regs[w] = cx.get(sig);
                }
            }
        }

        if in_reset {
            self.reset_all();
            if !self.fault(Fault::ForwardInReset) {
                self.te_op_reset(cx);
                self.drive_registered(cx, true);
                return;
            }
        }

        if s_ar_fire {
            self.ar_slot = None;
        }
        if s_aw_fire {
            self.aw_slot = None;
        }
        if r_fire {
            match self.r_sel {
                Some(Src::Fabric) => {
                    if r_last {
                        self.st.outstanding_r = self.st.outstanding_r.saturating_sub(1);
                        self.r_lock = None;
                    } else {
                        self.r_lock = Some(Src::Fabric);
                    }
                }
                Some(Src::Error) => {
                    if let Some(j) = self.r_err.as_mut() {
                        j.left -= 1;
                        if j.left == 0 {
                            self.r_err = None;
                            self.r_lock = None;
                        } else {
                            self.r_lock = Some(Src::Error);
                        }
                    }
                }
                _ => {}
            }
        }
        if b_fire {
            match self.b_sel {
                Some(Src::Fabric) => self.st.outstanding_w = self.st.outstanding_w.saturating_sub(1),
                Some(Src::Error) => self.b_err = None,
                Some(Src::Local) => {
                    self.b_local.pop_front();
                }
                None => {}
            }
        }
        if w_fire {
            self.w_beat(cx, &c);
        }
        if ar_fire {
            let tr = c.request(cx, Dir::Read);
            self.accept(cx, tr, in_reset);
        }
        if aw_fire {
            let tr = c.request(cx, Dir::Write);
            self.accept(cx, tr, in_reset);
        }
        self.te_op(cx);
        self.drive_registered(cx, in_reset);
    }

    fn settle(&mut self, cx: &mut Cx<'_>) {
        let (c, f) = (self.c_in.expect("bound"), self.f_in.expect("bound"));
        let (m, s) = (self.m, self.s);
        if cx.in_reset() && !self.fault(Fault::ForwardInReset) {
            self.r_sel = None;
            self.b_sel = None;
            for id in [m.r_id, m.r_data, m.r_resp, m.r_last, m.r_valid, m.w_ready, m.b_id, m.b_resp, m.b_valid] {
                cx.clear(id);
            }
            for id in [s.r_ready, s.w_data, s.w_last, s.w_valid, s.b_ready] {
                cx.clear(id);
            }
            return;
        }

        // R: locked source first, then the fabric, then a pending error
        // burst once every earlier legal read has drained.
        let err_ready = self.r_err.is_some() && self.st.outstanding_r == 0;
        self.r_sel = match self.r_lock {
            Some(src) => Some(src),
            None if cx.bit(f.r_valid) => Some(Src::Fabric),
            None if err_ready => Some(Src::Error),
            None => None,
        };
        match self.r_sel {
            Some(Src::Fabric) => {
                let beat = f.read_beat(cx);
                if cx.bit(f.r_valid) {
                    m.drive_beat(cx, Some(&beat));
                } else {
                    m.drive_beat(cx, None);
                }
                cx.set_tv(s.r_ready, cx.get(c.r_ready));
            }
            Some(Src::Error) => {
                let j = self.r_err.as_ref().expect("error job");
                let o = &self.origin;
                let tb = crate::axi::TaintedBeat {
                    id: Tv::new(u64::from(j.req.id), o.clone()),
                    data: Tv::new(0, o.clone()),
                    resp: Tv::new(Resp::SlvErr.encode(), o.clone()),
                    last: Tv::new(u64::from(j.left == 1), o.clone()),
                    valid: o.clone(),
                };
                m.drive_beat(cx, Some(&tb));
                cx.clear(s.r_ready);
            }
            _ => {
                m.drive_beat(cx, None);
                cx.clear(s.r_ready);
            }
        }

        // W: follow the route of the oldest accepted write.
        match self.w_routes.front().map(|r| r.kind) {
            Some(RouteKind::Forward) => {
                cx.set_tv(s.w_data, cx.get(c.w_data));
                cx.set_tv(s.w_last, cx.get(c.w_last));
                cx.set_tv(s.w_valid, cx.get(c.w_valid));
                cx.set_tv(m.w_ready, cx.get(f.w_ready));
            }
            Some(_) => {
                for id in [s.w_data, s.w_last, s.w_valid] {
                    cx.clear(id);
                }
                cx.set_clean(m.w_ready, 1);
            }
            None => {
                for id in [s.w_data, s.w_last, s.w_valid, m.w_ready] {
                    cx.clear(id);
                }
            }
        }

        // B: fabric, then local register writes, then a pending error.
        let err_ready = self.b_err.as_ref().is_some_and(|j| j.armed) && self.st.outstanding_w == 0;
        self.b_sel = if cx.bit(f.b_valid) {
            Some(Src::Fabric)
        } else if !self.b_local.is_empty() {
            Some(Src::Local)
        } else if err_ready {
            Some(Src::Error)
        } else {
            None
        };
        match self.b_sel {
            Some(Src::Fabric) => {
                m.drive_b(cx, Some(&f.read_b(cx)));
                cx.set_tv(s.b_ready, cx.get(c.b_ready));
            }
            Some(Src::Local) => {
                m.drive_b(
                    cx,
                    Some(&crate::axi::TaintedB {
                        id: Tv::clean(u64::from(self.b_local[0])),
                        resp: Tv::clean(0),
                        valid: TaintSet::new(),
                    }),
                );
                cx.clear(s.b_ready);
            }
            Some(Src::Error) => {
                let j = self.b_err.as_ref().expect("error job");
                let o = &self.origin;
                let b = crate::axi::TaintedB {
                    id: Tv::new(u64::from(j.req.id), o.clone()),
                    resp: Tv::new(Resp::SlvErr.encode(), o.clone()),
                    valid: o.clone(),
                };
                m.drive_b(cx, Some(&b));
                cx.clear(s.b_ready);
            }
            None => {
                m.drive_b(cx, None);
                cx.clear(s.b_ready);
            }
        }
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}

impl Acw {
    fn te_op_reset(&mut self, cx: &mut Cx<'_>) {
        cx.clear(self.cfgp_rdata);
        cx.clear(self.cfgp_rvalid);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axi::Burst;
    use proptest::prelude::*;

    fn rd(addr: u64, len: u8, size: u8) -> AxiRequest {
        AxiRequest { id: 0, addr, len, size, burst: Burst::Incr, dir: Dir::Read }
    }

    #[test]
    fn containment_examples() {
        let l = Lacp::new(vec![Region::new(0x1000, 0x1000)], vec![]);
        assert_eq!(check_legal(&l, &rd(0x1000, 15, 2)), Verdict::Legal);
        assert_eq!(check_legal(&l, &rd(0x0ffc, 3, 2)), Verdict::Illegal);
        // [0x1080, 0x1180) holds all of [0x10f0, 0x1110).
        let w = Lacp::new(vec![], vec![Region::new(0x1000, 0x100), Region::new(0x1080, 0x100)]);
        let req = AxiRequest { dir: Dir::Write, ..rd(0x10f0, 7, 2) };
        assert_eq!(check_legal(&w, &req), Verdict::Legal);
        // Covered by the union of two adjacent regions but by neither alone.
        let w = Lacp::new(vec![], vec![Region::new(0x1000, 0x100), Region::new(0x1100, 0x100)]);
        assert_eq!(check_legal(&w, &req), Verdict::Illegal);
    }

    #[test]
    fn disabled_regions_admit_nothing() {
        let l = Lacp::new(vec![Region::new(0, 0)], vec![]);
        assert_eq!(check_legal(&l, &rd(0, 0, 0)), Verdict::Illegal);
    }

    #[test]
    fn te_configuration_enters_supervising() {
        let mut st = AcwState::new(2, 2);
        let base = regs::region(2, false, 0, 0);
        st.cfg_write(base, Tv::clean(0x1000), Actor::Te).unwrap();
        st.cfg_write(base + 8, Tv::clean(0x1000), Actor::Te).unwrap();
        assert_eq!(st.cfg_read(base).unwrap().v, 0, "registers stay at default in reset");
        st.cfg_write(regs::CTRL, Tv::clean(regs::CTRL_VALID), Actor::Te).unwrap();
        assert_eq!((st.r_state, st.w_state), (Mode::Supervising, Mode::Supervising));
        assert_eq!(st.lacp().read[0], Region::new(0x1000, 0x1000));
    }

    #[test]
    fn controller_writes_are_rejected() {
        let mut st = AcwState::new(2, 2);
        let off = regs::region(2, false, 0, 0);
        assert_eq!(st.cfg_write(off, Tv::clean(5), Actor::Controller), Err(CfgError::Unauthorized(off)));
        assert_eq!(st.staging[(off / 4) as usize].v, 0);
        assert_eq!(st.rejected.len(), 1);
        assert_eq!(st.cfg_write(0x1c, Tv::clean(0), Actor::Te), Err(CfgError::OutOfMap(0x1c)));
        assert!(st.cfg_read(0x1000).is_err());
    }

    #[test]
    fn readmit_clears_anomaly() {
        let mut st = AcwState::new(2, 2);
        st.cfg_write(regs::CTRL, Tv::clean(1), Actor::Te).unwrap();
        let req = AxiRequest { id: 3, dir: Dir::Write, ..rd(0xDEAD000, 0, 2) };
        assert_eq!(st.on_request(&req, &ReqTaint::default(), 7), Verdict::Illegal);
        assert_eq!(st.w_state, Mode::Decouple);
        assert!(st.intr(Dir::Write));
        assert_eq!(st.cfg_read(regs::ANOMALY_ADDR_LO).unwrap().v, 0xDEAD000);
        assert_eq!(st.cfg_read(regs::ANOMALY_META).unwrap().v >> 16, 3);
        assert_eq!(st.cfg_read(regs::STATUS).unwrap().v, 0b1001);
        st.cfg_write(regs::CTRL, Tv::clean(1 | regs::CTRL_READMIT_W), Actor::Te).unwrap();
        assert_eq!(st.w_state, Mode::Supervising);
        assert_eq!(st.anomaly(), [0; 5]);
    }

    #[test]
    fn every_register_reads_zero_in_reset() {
        let st = AcwState::new(4, 4);
        for w in 0..st.regs.len() {
            if w != 7 {
                assert_eq!(st.cfg_read(4 * w as u64).unwrap().v, 0);
            }
        }
    }

    /// Byte-enumeration oracle for containment.
    fn oracle(lacp: &Lacp, req: &AxiRequest) -> Verdict {
        if req.validate().is_err() {
            return Verdict::Illegal;
        }
        let bytes: Vec<u64> = req.beat_addresses().into_iter().flat_map(|a| a..a + req.beat_bytes()).collect();
        let ok = lacp
            .regions(req.dir)
            .iter()
            .filter(|r| r.size > 0)
            .any(|r| bytes.iter().all(|&b| b >= r.base && b < r.base + r.size));
        if ok {
            Verdict::Legal
        } else {
            Verdict::Illegal
        }
    }

    fn region() -> impl Strategy<Value = Region> {
        (0u64..0x1_0000, 0u64..0x2000).prop_map(|(b, s)| Region::new(b, s))
    }

    proptest! {
        #[test]
        fn check_legal_matches_oracle(
            rs in proptest::collection::vec(region(), 1..4),
            ws in proptest::collection::vec(region(), 1..4),
            addr in 0u64..0x1_0000, len in 0u8..16, size in 0u8..3, b in 0usize..3, write: bool,
        ) {
            let lacp = Lacp::new(rs, ws);
            let req = AxiRequest {
                id: 0, addr, len, size,
                burst: [Burst::Fixed, Burst::Incr, Burst::Wrap][b],
                dir: if write { Dir::Write } else { Dir::Read },
            };
            prop_assert_eq!(check_legal(&lacp, &req), oracle(&lacp, &req));
        }

        #[test]
        fn interrupts_track_decouple(ops in proptest::collection::vec((0u8..5, 0u64..0x4000, any::<bool>()), 0..60)) {
            let mut st = AcwState::new(2, 2);
            for (op, addr, write) in ops {
                let dir = if write { Dir::Write } else { Dir::Read };
                let before = st.anomaly();
                match op {
                    0 => { st.cfg_write(regs::CTRL, Tv::clean(1), Actor::Te).unwrap(); }
                    1 => {
                        st.cfg_write(regs::region(2, write, 0, 0), Tv::clean(0x1000), Actor::Te).unwrap();
                        st.cfg_write(regs::region(2, write, 0, 2), Tv::clean(0x1000), Actor::Te).unwrap();
                    }
                    2 => {
                        if st.state(dir) == Mode::Supervising {
                            let req = AxiRequest { dir, ..rd(addr, 3, 2) };
                            match st.on_request(&req, &ReqTaint::default(), 1) {
                                Verdict::Illegal => prop_assert_eq!(st.anomaly()[0], addr),
                                Verdict::Legal => prop_assert_eq!(st.anomaly(), before),
                            }
                        }
                    }
                    3 => { st.cfg_write(regs::CTRL, Tv::clean(1 | 6), Actor::Te).unwrap(); }
                    _ => {
                        st.reset(false);
                        prop_assert_eq!(st.anomaly(), [0; 5]);
                        prop_assert!(st.regs.iter().all(|r| r.v == 0));
                    }
                }
                if op == 0 || op == 1 {
                    prop_assert_eq!(st.anomaly(), before);
                }
                prop_assert_eq!(st.intr(Dir::Read), st.r_state == Mode::Decouple);
                prop_assert_eq!(st.intr(Dir::Write), st.w_state == Mode::Decouple);
                if st.r_state == Mode::Reset {
                    prop_assert!(st.regs.iter().all(|r| r.v == 0));
                }
            }
        }
    }
}
