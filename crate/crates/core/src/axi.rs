// SPDX-License-Identifier: Apache-2.0

//! Transaction-level AXI channel model.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kernel::{register, Cx, ResetDomain, SignalId, SignalKind, SignalRegistry, SimError, TaintSet, Trace, Tv};

pub const ADDR_BITS: u32 = 40;
pub const ADDR_LIMIT: u64 = 1 << ADDR_BITS;
pub const MAX_BURST_BYTES: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Burst {
    Fixed,
    Incr,
    Wrap,
}

impl Burst {
    pub fn encode(self) -> u64 {
        match self {
            Burst::Fixed => 0,
            Burst::Incr => 1,
            Burst::Wrap => 2,
        }
    }

    pub fn decode(v: u64) -> Option<Self> {
        match v {
            0 => Some(Burst::Fixed),
            1 => Some(Burst::Incr),
            2 => Some(Burst::Wrap),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Dir {
    Read,
    Write,
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dir::Read => "read",
            Dir::Write => "write",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resp {
    Okay,
    SlvErr,
    DecErr,
}

impl Resp {
    pub fn encode(self) -> u64 {
        match self {
            Resp::Okay => 0,
            Resp::SlvErr => 0b10,
            Resp::DecErr => 0b11,
        }
    }

    pub fn decode(v: u64) -> Self {
        match v {
            0b10 => Resp::SlvErr,
            0b11 => Resp::DecErr,
            _ => Resp::Okay,
        }
    }

    /// The more severe of two responses.
    pub fn worst(self, other: Resp) -> Resp {
        if self.encode() >= other.encode() {
            self
        } else {
            other
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AxiRequest {
    pub id: u16,
    pub addr: u64,
    pub len: u8,
    pub size: u8,
    pub burst: Burst,
    pub dir: Dir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RequestError {
    #[error("address {0:#x} outside the 40-bit space")]
    Address(u64),
    #[error("beat size 2^{0} too large")]
    Size(u8),
    #[error("burst of {0} bytes exceeds 4096")]
    TooLong(u64),
    #[error("WRAP burst needs 2, 4, 8 or 16 beats, got {0}")]
    WrapLen(u16),
    #[error("WRAP address {0:#x} not aligned to the beat size")]
    WrapAlign(u64),
    #[error("reserved burst encoding")]
    BurstCode,
}

impl AxiRequest {
    pub fn incr(dir: Dir, addr: u64, beats: u16, size: u8) -> Self {
        Self { id: 0, addr, len: (beats - 1) as u8, size, burst: Burst::Incr, dir }
    }

    pub fn with_id(mut self, id: u16) -> Self {
        self.id = id;
        self
    }

    pub fn beats(&self) -> u16 {
        u16::from(self.len) + 1
    }

    pub fn beat_bytes(&self) -> u64 {
        1u64 << self.size
    }

    pub fn total_bytes(&self) -> u64 {
        u64::from(self.beats()) * self.beat_bytes()
    }

    pub fn validate(&self) -> Result<(), RequestError> {
        if self.size > 7 {
            return Err(RequestError::Size(self.size));
        }
        if self.total_bytes() > MAX_BURST_BYTES {
            return Err(RequestError::TooLong(self.total_bytes()));
        }
        if self.addr >= ADDR_LIMIT {
            return Err(RequestError::Address(self.addr));
        }
        if self.burst == Burst::Wrap {
            if !matches!(self.beats(), 2 | 4 | 8 | 16) {
                return Err(RequestError::WrapLen(self.beats()));
            }
            if !self.addr.is_multiple_of(self.beat_bytes()) {
                return Err(RequestError::WrapAlign(self.addr));
            }
        }
        let fp = footprint_unchecked(self);
        if fp.hi > ADDR_LIMIT {
            return Err(RequestError::Address(fp.hi));
        }
        Ok(())
    }

    /// Start address of each beat.
    pub fn beat_addresses(&self) -> Vec<u64> {
        let n = u64::from(self.beats());
        let sz = self.beat_bytes();
        match self.burst {
            Burst::Fixed => vec![self.addr; n as usize],
            Burst::Incr => (0..n).map(|i| self.addr + i * sz).collect(),
            Burst::Wrap => {
                let total = n * sz;
                let w = self.addr - self.addr % total;
                (0..n).map(|i| w + (self.addr - w + i * sz) % total).collect()
            }
        }
    }
}

/// Half-open byte range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AddressInterval {
    pub lo: u64,
    pub hi: u64,
}

impl AddressInterval {
    pub fn new(lo: u64, hi: u64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.lo && addr < self.hi
    }
}

fn footprint_unchecked(req: &AxiRequest) -> AddressInterval {
    let total = req.total_bytes();
    match req.burst {
        Burst::Fixed => AddressInterval::new(req.addr, req.addr + req.beat_bytes()),
        Burst::Incr => AddressInterval::new(req.addr, req.addr + total),
        Burst::Wrap => {
            let w = req.addr - req.addr % total;
            AddressInterval::new(w, w + total)
        }
    }
}

/// Bytes touched by a burst.
pub fn burst_footprint(req: &AxiRequest) -> Result<AddressInterval, RequestError> {
    req.validate()?;
    Ok(footprint_unchecked(req))
}

pub fn is_transfer(valid: bool, ready: bool) -> bool {
    valid && ready
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataBeat {
    pub id: u16,
    pub data: u64,
    pub last: bool,
    pub resp: Resp,
    pub taint: TaintSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteResponse {
    pub id: u16,
    pub resp: Resp,
    pub taint: TaintSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ErrorBurst {
    Read(Vec<DataBeat>),
    Write(WriteResponse),
}

/// Error reply for a blocked request. `origin` is the blocker's own label,
/// never the requester's.
pub fn make_error_burst(req: &AxiRequest, origin: &TaintSet) -> ErrorBurst {
    match req.dir {
        Dir::Read => {
            let n = req.beats();
            ErrorBurst::Read(
                (0..n)
                    .map(|i| DataBeat {
                        id: req.id,
                        data: 0,
                        last: i + 1 == n,
                        resp: Resp::SlvErr,
                        taint: origin.clone(),
                    })
                    .collect(),
            )
        }
        Dir::Write => ErrorBurst::Write(WriteResponse { id: req.id, resp: Resp::SlvErr, taint: origin.clone() }),
    }
}

// ---------------------------------------------------------------------------
// Port bundles

/// Manager-driven signals, in canonical order.
pub const MANAGER_SIGNALS: [(&str, u8); 17] = [
    ("ARID", 16),
    ("ARADDR", 40),
    ("ARLEN", 8),
    ("ARSIZE", 3),
    ("ARBURST", 2),
    ("ARVALID", 1),
    ("RREADY", 1),
    ("AWID", 16),
    ("AWADDR", 40),
    ("AWLEN", 8),
    ("AWSIZE", 3),
    ("AWBURST", 2),
    ("AWVALID", 1),
    ("WDATA", 64),
    ("WLAST", 1),
    ("WVALID", 1),
    ("BREADY", 1),
];

/// Subordinate-driven signals, in canonical order.
pub const SUBORDINATE_SIGNALS: [(&str, u8); 11] = [
    ("ARREADY", 1),
    ("RID", 16),
    ("RDATA", 64),
    ("RRESP", 2),
    ("RLAST", 1),
    ("RVALID", 1),
    ("AWREADY", 1),
    ("WREADY", 1),
    ("BID", 16),
    ("BRESP", 2),
    ("BVALID", 1),
];

fn register_bundle(
    reg: &mut SignalRegistry,
    owner: usize,
    prefix: &str,
    fields: &[(&str, u8)],
    domain: ResetDomain,
    kind: &dyn Fn(&str) -> SignalKind,
) -> Result<Vec<SignalId>, SimError> {
    fields.iter().map(|&(f, w)| register(reg, owner, format!("{prefix}{f}"), w, kind(f), domain)).collect()
}

fn bind_bundle(reg: &SignalRegistry, prefix: &str, fields: &[(&str, u8)]) -> Result<Vec<SignalId>, SimError> {
    fields.iter().map(|&(f, _)| reg.id(&format!("{prefix}{f}"))).collect()
}

/// Signals a manager drives (AR, AW, W, and the R/B ready lines).
#[derive(Debug, Clone, Copy)]
pub struct ManagerOut {
    pub ar_id: SignalId,
    pub ar_addr: SignalId,
    pub ar_len: SignalId,
    pub ar_size: SignalId,
    pub ar_burst: SignalId,
    pub ar_valid: SignalId,
    pub r_ready: SignalId,
    pub aw_id: SignalId,
    pub aw_addr: SignalId,
    pub aw_len: SignalId,
    pub aw_size: SignalId,
    pub aw_burst: SignalId,
    pub aw_valid: SignalId,
    pub w_data: SignalId,
    pub w_last: SignalId,
    pub w_valid: SignalId,
    pub b_ready: SignalId,
}

impl ManagerOut {
    fn from_ids(v: &[SignalId]) -> Self {
        Self {
            ar_id: v[0],
            ar_addr: v[1],
            ar_len: v[2],
            ar_size: v[3],
            ar_burst: v[4],
            ar_valid: v[5],
            r_ready: v[6],
            aw_id: v[7],
            aw_addr: v[8],
            aw_len: v[9],
            aw_size: v[10],
            aw_burst: v[11],
            aw_valid: v[12],
            w_data: v[13],
            w_last: v[14],
            w_valid: v[15],
            b_ready: v[16],
        }
    }

    pub fn register(
        reg: &mut SignalRegistry,
        owner: usize,
        prefix: &str,
        domain: ResetDomain,
        kind: &dyn Fn(&str) -> SignalKind,
    ) -> Result<Self, SimError> {
        Ok(Self::from_ids(&register_bundle(reg, owner, prefix, &MANAGER_SIGNALS, domain, kind)?))
    }

    pub fn bind(reg: &SignalRegistry, prefix: &str) -> Result<Self, SimError> {
        Ok(Self::from_ids(&bind_bundle(reg, prefix, &MANAGER_SIGNALS)?))
    }

    pub fn ids(&self) -> [SignalId; 17] {
        [
            self.ar_id,
            self.ar_addr,
            self.ar_len,
            self.ar_size,
            self.ar_burst,
            self.ar_valid,
            self.r_ready,
            self.aw_id,
            self.aw_addr,
            self.aw_len,
            self.aw_size,
            self.aw_burst,
            self.aw_valid,
            self.w_data,
            self.w_last,
            self.w_valid,
            self.b_ready,
        ]
    }

    /// The address request currently presented on AR or AW.
    pub fn request(&self, cx: &Cx<'_>, dir: Dir) -> TaintedReq {
        let f = match dir {
            Dir::Read => [self.ar_id, self.ar_addr, self.ar_len, self.ar_size, self.ar_burst, self.ar_valid],
            Dir::Write => [self.aw_id, self.aw_addr, self.aw_len, self.aw_size, self.aw_burst, self.aw_valid],
        };
        let raw_burst = cx.val(f[4]);
        let req = AxiRequest {
            id: cx.val(f[0]) as u16,
            addr: cx.val(f[1]),
            len: cx.val(f[2]) as u8,
            size: cx.val(f[3]) as u8,
            burst: Burst::decode(raw_burst).unwrap_or(Burst::Incr),
            dir,
        };
        TaintedReq {
            req,
            reserved_burst: Burst::decode(raw_burst).is_none(),
            t: ReqTaint {
                id: cx.taint(f[0]).clone(),
                addr: cx.taint(f[1]).clone(),
                len: cx.taint(f[2]).clone(),
                size: cx.taint(f[3]).clone(),
                burst: cx.taint(f[4]).clone(),
                valid: cx.taint(f[5]).clone(),
            },
        }
    }

    /// Drives AR or AW with `req`, or idles the channel.
    pub fn drive_request(&self, cx: &mut Cx<'_>, dir: Dir, req: Option<&TaintedReq>) {
        let f = match dir {
            Dir::Read => [self.ar_id, self.ar_addr, self.ar_len, self.ar_size, self.ar_burst, self.ar_valid],
            Dir::Write => [self.aw_id, self.aw_addr, self.aw_len, self.aw_size, self.aw_burst, self.aw_valid],
        };
        match req {
            Some(r) => {
                cx.set(f[0], u64::from(r.req.id), r.t.id.clone());
                cx.set(f[1], r.req.addr, r.t.addr.clone());
                cx.set(f[2], u64::from(r.req.len), r.t.len.clone());
                cx.set(f[3], u64::from(r.req.size), r.t.size.clone());
                cx.set(f[4], r.req.burst.encode(), r.t.burst.clone());
                cx.set(f[5], 1, r.t.valid.clone());
            }
            None => {
                for s in f {
                    cx.clear(s);
                }
            }
        }
    }
}

/// Signals a subordinate drives (R, B, and the AR/AW/W ready lines).
#[derive(Debug, Clone, Copy)]
pub struct SubordinateOut {
    pub ar_ready: SignalId,
    pub r_id: SignalId,
    pub r_data: SignalId,
    pub r_resp: SignalId,
    pub r_last: SignalId,
    pub r_valid: SignalId,
    pub aw_ready: SignalId,
    pub w_ready: SignalId,
    pub b_id: SignalId,
    pub b_resp: SignalId,
    pub b_valid: SignalId,
}

impl SubordinateOut {
    fn from_ids(v: &[SignalId]) -> Self {
        Self {
            ar_ready: v[0],
            r_id: v[1],
            r_data: v[2],
            r_resp: v[3],
            r_last: v[4],
            r_valid: v[5],
            aw_ready: v[6],
            w_ready: v[7],
            b_id: v[8],
            b_resp: v[9],
            b_valid: v[10],
        }
    }

    pub fn register(
        reg: &mut SignalRegistry,
        owner: usize,
        prefix: &str,
        domain: ResetDomain,
        kind: &dyn Fn(&str) -> SignalKind,
    ) -> Result<Self, SimError> {
        Ok(Self::from_ids(&register_bundle(reg, owner, prefix, &SUBORDINATE_SIGNALS, domain, kind)?))
    }

    pub fn bind(reg: &SignalRegistry, prefix: &str) -> Result<Self, SimError> {
        Ok(Self::from_ids(&bind_bundle(reg, prefix, &SUBORDINATE_SIGNALS)?))
    }

    pub fn ids(&self) -> [SignalId; 11] {
        [
            self.ar_ready,
            self.r_id,
            self.r_data,
            self.r_resp,
            self.r_last,
            self.r_valid,
            self.aw_ready,
            self.w_ready,
            self.b_id,
            self.b_resp,
            self.b_valid,
        ]
    }

    pub fn read_beat(&self, cx: &Cx<'_>) -> TaintedBeat {
        TaintedBeat {
            id: cx.get(self.r_id),
            data: cx.get(self.r_data),
            resp: cx.get(self.r_resp),
            last: cx.get(self.r_last),
            valid: cx.taint(self.r_valid).clone(),
        }
    }

    pub fn drive_beat(&self, cx: &mut Cx<'_>, beat: Option<&TaintedBeat>) {
        match beat {
            Some(b) => {
                cx.set_tv(self.r_id, b.id.clone());
                cx.set_tv(self.r_data, b.data.clone());
                cx.set_tv(self.r_resp, b.resp.clone());
                cx.set_tv(self.r_last, b.last.clone());
                cx.set(self.r_valid, 1, b.valid.clone());
            }
            None => {
                for s in [self.r_id, self.r_data, self.r_resp, self.r_last, self.r_valid] {
                    cx.clear(s);
                }
            }
        }
    }

    pub fn read_b(&self, cx: &Cx<'_>) -> TaintedB {
        TaintedB { id: cx.get(self.b_id), resp: cx.get(self.b_resp), valid: cx.taint(self.b_valid).clone() }
    }

    pub fn drive_b(&self, cx: &mut Cx<'_>, b: Option<&TaintedB>) {
        match b {
            Some(b) => {
                cx.set_tv(self.b_id, b.id.clone());
                cx.set_tv(self.b_resp, b.resp.clone());
                cx.set(self.b_valid, 1, b.valid.clone());
            }
            None => {
                for s in [self.b_id, self.b_resp, self.b_valid] {
                    cx.clear(s);
                }
            }
        }
    }
}

/// Per-field taint of an address request.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReqTaint {
    pub id: TaintSet,
    pub addr: TaintSet,
    pub len: TaintSet,
    pub size: TaintSet,
    pub burst: TaintSet,
    pub valid: TaintSet,
}

impl ReqTaint {
    pub fn all(&self) -> TaintSet {
        crate::kernel::union_all([&self.id, &self.addr, &self.len, &self.size, &self.burst, &self.valid])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaintedReq {
    pub req: AxiRequest,
    pub t: ReqTaint,
    /// Burst field carried the reserved encoding.
    pub reserved_burst: bool,
}

impl TaintedReq {
    pub fn clean(req: AxiRequest) -> Self {
        Self { req, t: ReqTaint::default(), reserved_burst: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaintedBeat {
    pub id: Tv,
    pub data: Tv,
    pub resp: Tv,
    pub last: Tv,
    pub valid: TaintSet,
}

impl TaintedBeat {
    pub fn is_last(&self) -> bool {
        self.last.v != 0
    }

    pub fn from_beat(b: &DataBeat) -> Self {
        Self {
            id: Tv::new(u64::from(b.id), b.taint.clone()),
            data: Tv::new(b.data, b.taint.clone()),
            resp: Tv::new(b.resp.encode(), b.taint.clone()),
            last: Tv::new(u64::from(b.last), b.taint.clone()),
            valid: b.taint.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaintedB {
    pub id: Tv,
    pub resp: Tv,
    pub valid: TaintSet,
}

impl TaintedB {
    pub fn from_response(b: &WriteResponse) -> Self {
        Self {
            id: Tv::new(u64::from(b.id), b.taint.clone()),
            resp: Tv::new(b.resp.encode(), b.taint.clone()),
            valid: b.taint.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Protocol checker

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Stability { channel: String },
    BeatCount { channel: String, id: u16, expected: u16, got: u16 },
    EarlyResponse { id: u16 },
    UnknownId { channel: String, id: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProtocolViolation {
    pub cycle: u64,
    pub kind: ViolationKind,
}

/// Which trace columns make up one interface.
#[derive(Debug, Clone)]
pub struct Interface {
    /// Prefix of the manager-driven signals, e.g. `c0.m.`.
    pub manager: String,
    /// Prefix of the subordinate-driven signals, e.g. `acw0.m.`.
    pub subordinate: String,
    /// Columns that reset the interface; `(name, active_low)`.
    pub resets: Vec<(String, bool)>,
}

impl Interface {
    pub fn new(manager: impl Into<String>, subordinate: impl Into<String>) -> Self {
        Self { manager: manager.into(), subordinate: subordinate.into(), resets: Vec::new() }
    }

    pub fn with_reset(mut self, name: impl Into<String>, active_low: bool) -> Self {
        self.resets.push((name.into(), active_low));
        self
    }

    /// Every column the checker reads.
    pub fn columns(&self) -> Vec<String> {
        let mut v: Vec<String> = MANAGER_SIGNALS.iter().map(|(f, _)| format!("{}{f}", self.manager)).collect();
        v.extend(SUBORDINATE_SIGNALS.iter().map(|(f, _)| format!("{}{f}", self.subordinate)));
        v.extend(self.resets.iter().map(|(n, _)| n.clone()));
        v
    }
}

#[derive(Default)]
struct WriteTrack {
    id: u16,
    expected: u16,
    got: u16,
    done: bool,
}

/// Scans one interface of a trace for handshake and burst-shape errors.
pub fn protocol_check(trace: &Trace, itf: &Interface) -> Result<Vec<ProtocolViolation>, SimError> {
    let m = |f: &str| trace.column(&format!("{}{f}", itf.manager));
    let s = |f: &str| trace.column(&format!("{}{f}", itf.subordinate));
    let chans = [
        ("AR", m("ARVALID")?, s("ARREADY")?, vec![m("ARID")?, m("ARADDR")?, m("ARLEN")?, m("ARSIZE")?, m("ARBURST")?]),
        ("AW", m("AWVALID")?, s("AWREADY")?, vec![m("AWID")?, m("AWADDR")?, m("AWLEN")?, m("AWSIZE")?, m("AWBURST")?]),
        ("W", m("WVALID")?, s("WREADY")?, vec![m("WDATA")?, m("WLAST")?]),
        ("R", s("RVALID")?, m("RREADY")?, vec![s("RID")?, s("RDATA")?, s("RRESP")?, s("RLAST")?]),
        ("B", s("BVALID")?, m("BREADY")?, vec![s("BID")?, s("BRESP")?]),
    ];
    let resets =
        itf.resets.iter().map(|(n, low)| Ok((trace.column(n)?, *low))).collect::<Result<Vec<_>, SimError>>()?;
    let (ar_id, ar_len) = (m("ARID")?, m("ARLEN")?);
    let (aw_id, aw_len) = (m("AWID")?, m("AWLEN")?);
    let (w_last, r_id, r_last, b_id) = (m("WLAST")?, s("RID")?, s("RLAST")?, s("BID")?);

    let mut out = Vec::new();
    let mut reads: HashMap<u16, VecDeque<(u16, u16)>> = HashMap::new();
    let mut writes: VecDeque<WriteTrack> = VecDeque::new();
    let mut stalled: [Option<Vec<u64>>; 5] = Default::default();

    for r in 0..trace.len() {
        let cycle = trace.cycles()[r];
        let row = trace.row(r);
        let in_reset = resets.iter().any(|&(c, low)| (row[c] == 0) == low);
        if in_reset {
            reads.clear();
            writes.clear();
            stalled = Default::default();
            continue;
        }
        let mut fire = [false; 5];
        for (i, (name, v, rd, payload)) in chans.iter().enumerate() {
            let valid = row[*v] != 0;
            let ready = row[*rd] != 0;
            if let Some(prev) = stalled[i].take() {
                let now: Vec<u64> = payload.iter().map(|&p| row[p]).collect();
                if !valid || now != prev {
                    out.push(ProtocolViolation { cycle, kind: ViolationKind::Stability { channel: name.to_string() } });
                }
            }
            fire[i] = valid && ready;
            if valid && !ready {
                stalled[i] = Some(payload.iter().map(|&p| row[p]).collect());
            }
        }
        if fire[0] {
            let id = row[ar_id] as u16;
            reads.entry(id).or_default().push_back((row[ar_len] as u16 + 1, 0));
        }
        if fire[1] {
            writes.push_back(WriteTrack {
                id: row[aw_id] as u16,
                expected: row[aw_len] as u16 + 1,
                ..Default::default()
            });
        }
        if fire[2] {
            match writes.iter_mut().find(|w| !w.done) {
                Some(w) => {
                    w.got += 1;
                    let last = row[w_last] != 0;
                    if last || w.got == w.expected {
                        if !(last && w.got == w.expected) {
                            out.push(ProtocolViolation {
                                cycle,
                                kind: ViolationKind::BeatCount {
                                    channel: "W".into(),
                                    id: w.id,
                                    expected: w.expected,
                                    got: w.got,
                                },
                            });
                        }
                        w.done = true;
                    }
                }
                None => out.push(ProtocolViolation {
                    cycle,
                    kind: ViolationKind::BeatCount { channel: "W".into(), id: 0, expected: 0, got: 1 },
                }),
            }
        }
        if fire[3] {
            let id = row[r_id] as u16;
            match reads.get_mut(&id).and_then(|q| q.front_mut()) {
                Some((expected, got)) => {
                    *got += 1;
                    let last = row[r_last] != 0;
                    if last || *got == *expected {
                        if !(last && *got == *expected) {
                            out.push(ProtocolViolation {
                                cycle,
                                kind: ViolationKind::BeatCount {
                                    channel: "R".into(),
                                    id,
                                    expected: *expected,
                                    got: *got,
                                },
                            });
                        }
                        reads.get_mut(&id).map(|q| q.pop_front());
                    }
                }
                None => {
                    out.push(ProtocolViolation { cycle, kind: ViolationKind::UnknownId { channel: "R".into(), id } })
                }
            }
        }
        if fire[4] {
            let id = row[b_id] as u16;
            match writes.iter().position(|w| w.id == id) {
                Some(i) if writes[i].done => {
                    writes.remove(i);
                }
                Some(i) => {
                    out.push(ProtocolViolation { cycle, kind: ViolationKind::EarlyResponse { id } });
                    writes.remove(i);
                }
                None => {
                    out.push(ProtocolViolation { cycle, kind: ViolationKind::UnknownId { channel: "B".into(), id } })
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req(burst: Burst, addr: u64, len: u8, size: u8) -> AxiRequest {
        AxiRequest { id: 0, addr, len, size, burst, dir: Dir::Read }
    }

    #[test]
    fn footprint_examples() {
        assert_eq!(burst_footprint(&req(Burst::Incr, 0x1000, 15, 2)).unwrap(), AddressInterval::new(0x1000, 0x1040));
        assert_eq!(burst_footprint(&req(Burst::Fixed, 0x2008, 7, 3)).unwrap(), AddressInterval::new(0x2008, 0x2010));
        assert_eq!(burst_footprint(&req(Burst::Wrap, 0x1030, 7, 2)).unwrap(), AddressInterval::new(0x1020, 0x1040));
    }

    #[test]
    fn wrap_beats_enumerate_by_hand() {
        let r = req(Burst::Wrap, 0x1030, 7, 2);
        assert_eq!(r.beat_addresses(), vec![0x1030, 0x1034, 0x1038, 0x103c, 0x1020, 0x1024, 0x1028, 0x102c]);
    }

    #[test]
    fn invalid_requests_are_reported() {
        assert_eq!(burst_footprint(&req(Burst::Wrap, 0x1000, 2, 2)), Err(RequestError::WrapLen(3)));
        assert_eq!(burst_footprint(&req(Burst::Wrap, 0x1002, 3, 2)), Err(RequestError::WrapAlign(0x1002)));
        assert_eq!(burst_footprint(&req(Burst::Incr, 0, 255, 5)), Err(RequestError::TooLong(8192)));
        assert!(burst_footprint(&req(Burst::Incr, ADDR_LIMIT - 2, 0, 2)).is_err());
    }

    #[test]
    fn handshake_rule() {
        assert!(is_transfer(true, true));
        assert!(!is_transfer(true, false));
        assert!(!is_transfer(false, true));
    }

    #[test]
    fn error_bursts() {
        let origin = TaintSet::new();
        let ErrorBurst::Read(beats) = make_error_burst(&req(Burst::Incr, 0, 15, 2), &origin) else { panic!() };
        assert_eq!(beats.len(), 16);
        assert!(beats[15].last && beats[..15].iter().all(|b| !b.last));
        assert!(beats.iter().all(|b| b.resp == Resp::SlvErr && b.data == 0));
        let ErrorBurst::Read(one) = make_error_burst(&req(Burst::Incr, 0, 0, 2), &origin) else { panic!() };
        assert_eq!(one.len(), 1);
        assert!(one[0].last);
        let w = AxiRequest { id: 3, dir: Dir::Write, ..req(Burst::Incr, 0, 0, 2) };
        assert_eq!(
            make_error_burst(&w, &origin),
            ErrorBurst::Write(WriteResponse { id: 3, resp: Resp::SlvErr, taint: TaintSet::new() })
        );
    }

    #[test]
    fn resp_encodings() {
        assert_eq!(Resp::SlvErr.encode(), 0b10);
        assert_eq!(Resp::DecErr.encode(), 0b11);
        assert_eq!(Resp::decode(2), Resp::SlvErr);
        assert_eq!(Resp::Okay.worst(Resp::SlvErr), Resp::SlvErr);
    }

    fn byte_oracle(r: &AxiRequest) -> (u64, u64, u64) {
        // (min byte, max byte + 1, distinct byte count) by brute force.
        let mut bytes = std::collections::BTreeSet::new();
        for a in r.beat_addresses() {
            for b in a..a + r.beat_bytes() {
                bytes.insert(b);
            }
        }
        (*bytes.first().unwrap(), *bytes.last().unwrap() + 1, bytes.len() as u64)
    }

    fn valid_request() -> impl Strategy<Value = AxiRequest> {
        (0u64..1 << 24, 0u8..=255, 0u8..=4, 0usize..3).prop_filter_map("invalid", |(addr, len, size, b)| {
            let burst = [Burst::Fixed, Burst::Incr, Burst::Wrap][b];
            let len = if burst == Burst::Wrap { [1u8, 3, 7, 15][len as usize % 4] } else { len };
            let addr = if burst == Burst::Wrap { addr & !((1 << size) - 1) } else { addr };
            let r = AxiRequest { id: 0, addr, len, size, burst, dir: Dir::Write };
            r.validate().ok().map(|_| r)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn footprint_matches_per_beat_union(r in valid_request()) {
            let fp = burst_footprint(&r).unwrap();
            let (lo, hi, n) = byte_oracle(&r);
            prop_assert_eq!((fp.lo, fp.hi), (lo, hi));
            prop_assert_eq!(fp.len(), n);
            let expect = if r.burst == Burst::Fixed { r.beat_bytes() } else { r.total_bytes() };
            prop_assert_eq!(fp.len(), expect);
        }
    }

    fn names() -> Vec<String> {
        Interface::new("c.", "s.").columns()
    }

    fn rows(f: impl Fn(usize, &mut HashMap<&'static str, u64>), n: usize) -> Trace {
        let ns = names();
        let refs: Vec<&str> = ns.iter().map(String::as_str).collect();
        let mut out = Vec::new();
        for c in 0..n {
            let mut m = HashMap::new();
            f(c, &mut m);
            let row = ns
                .iter()
                .map(|n| {
                    let key = n.split('.').nth(1).unwrap();
                    m.iter().find(|(k, _)| **k == key).map(|(_, v)| *v).unwrap_or(0)
                })
                .collect();
            out.push((c as u64 + 1, row));
        }
        Trace::from_rows(&refs, &out)
    }

    #[test]
    fn stability_violation_on_dropped_valid() {
        let t = rows(
            |c, m| {
                if c == 0 {
                    m.insert("ARVALID", 1);
                }
            },
            3,
        );
        let v = protocol_check(&t, &Interface::new("c.", "s.")).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Stability { channel: "AR".into() });
    }

    #[test]
    fn clean_read_has_no_findings() {
        let t = rows(
            |c, m| {
                m.insert("RREADY", 1);
                match c {
                    0 => {
                        m.insert("ARVALID", 1);
                        m.insert("ARREADY", 1);
                        m.insert("ARLEN", 15);
                    }
                    3..=18 => {
                        m.insert("RVALID", 1);
                        m.insert("RLAST", u64::from(c == 18));
                    }
                    _ => {}
                }
            },
            20,
        );
        assert!(protocol_check(&t, &Interface::new("c.", "s.")).unwrap().is_empty());
    }

    #[test]
    fn short_write_burst_is_flagged() {
        let t = rows(
            |c, m| {
                m.insert("BREADY", 1);
                match c {
                    0 => {
                        m.insert("AWVALID", 1);
                        m.insert("AWREADY", 1);
                        m.insert("AWLEN", 15);
                    }
                    1..=15 => {
                        m.insert("WVALID", 1);
                        m.insert("WREADY", 1);
                        m.insert("WLAST", u64::from(c == 15));
                    }
                    17 => {
                        m.insert("BVALID", 1);
                    }
                    _ => {}
                }
            },
            20,
        );
        let v = protocol_check(&t, &Interface::new("c.", "s.")).unwrap();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0].kind, ViolationKind::BeatCount { expected: 16, got: 15, .. }));
    }

    #[test]
    fn b_before_last_w_and_unknown_ids() {
        let t = rows(
            |c, m| {
                m.insert("BREADY", 1);
                m.insert("RREADY", 1);
                match c {
                    0 => {
                        m.insert("AWVALID", 1);
                        m.insert("AWREADY", 1);
                        m.insert("AWLEN", 1);
                        m.insert("AWID", 4);
                    }
                    1 => {
                        m.insert("WVALID", 1);
                        m.insert("WREADY", 1);
                    }
                    2 => {
                        m.insert("BVALID", 1);
                        m.insert("BID", 4);
                    }
                    3 => {
                        m.insert("RVALID", 1);
                        m.insert("RID", 9);
                        m.insert("RLAST", 1);
                    }
                    _ => {}
                }
            },
            5,
        );
        let v = protocol_check(&t, &Interface::new("c.", "s.")).unwrap();
        assert_eq!(v[0].kind, ViolationKind::EarlyResponse { id: 4 });
        assert_eq!(v[1].kind, ViolationKind::UnknownId { channel: "R".into(), id: 9 });
    }
}
