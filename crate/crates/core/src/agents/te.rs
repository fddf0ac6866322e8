// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::acw::{regs, Lacp, CFG_PORT_SIGNALS};
use crate::axi::{Burst, Dir};
use crate::kernel::{register, Component, Cx, ResetDomain, SignalId, SignalKind, SignalRegistry, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Readmission {
    AlwaysReadmit {
        #[serde(default)]
        after_reset: bool,
    },
    ReadmitUpToN {
        n: u32,
    },
    PermanentDecouple,
}

impl Default for Readmission {
    fn default() -> Self {
        Readmission::AlwaysReadmit { after_reset: true }
    }
}

/// One ACW managed by the trusted entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManagedAcw {
    pub acw: String,
    pub controller: String,
    pub lacp: Lacp,
    pub n_read: usize,
    pub n_write: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeConfig {
    #[serde(default = "te_name")]
    pub name: String,
    #[serde(default)]
    pub readmission: Readmission,
    #[serde(default)]
    pub boot_delay: u64,
}

fn te_name() -> String {
    "te".into()
}

impl Default for TeConfig {
    fn default() -> Self {
        Self { name: te_name(), readmission: Readmission::default(), boot_delay: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TeError {
    #[error("interrupt from unknown ACW `{0}`")]
    UnknownAcw(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Readmit,
    ResetAndReadmit,
    Decouple,
}

/// Diagnostic record read back from an ACW's anomaly registers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IllegalEvent {
    /// Cycle the anomaly was captured.
    pub cycle: u64,
    pub acw: String,
    pub dir: Dir,
    pub addr: u64,
    pub len: u8,
    pub size: u8,
    pub burst: Option<Burst>,
    pub id: u16,
    /// Cycle the trusted entity logged it.
    pub logged_at: u64,
    pub action: Action,
}

impl IllegalEvent {
    fn from_words(acw: &str, w: [u64; 5], logged_at: u64, action: Action) -> Self {
        let meta = w[2];
        Self {
            cycle: w[3] | w[4] << 32,
            acw: acw.to_string(),
            dir: if meta >> 13 & 1 == 1 { Dir::Write } else { Dir::Read },
            addr: w[0] | w[1] << 32,
            len: meta as u8,
            size: (meta >> 8 & 7) as u8,
            burst: Burst::decode(meta >> 11 & 3),
            id: (meta >> 16) as u16,
            logged_at,
            action,
        }
    }
}

/// Writes events as JSON lines.
pub fn write_events<W: Write>(events: &[IllegalEvent], out: &mut W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut *out, e)?;
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Port {
    wen: SignalId,
    waddr: SignalId,
    wdata: SignalId,
    ren: SignalId,
    raddr: SignalId,
    rst: SignalId,
}

#[derive(Debug, Clone, Copy)]
struct AcwIn {
    intr_r: SignalId,
    intr_w: SignalId,
    rdata: SignalId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum State {
    Boot,
    Configure(VecDeque<(usize, u64, u64)>),
    Idle,
    ReadAnomaly { k: usize, dir: Dir, i: usize, words: [u64; 5] },
    Poll { k: usize, dir: Dir, words: [u64; 5] },
    Pulse { k: usize, dir: Dir },
    Readmit { k: usize, dir: Dir },
    Cooldown { until: u64 },
}

/// Behavioral trusted entity: boots the wrappers and services interrupts.
#[derive(Debug)]
pub struct Te {
    cfg: TeConfig,
    acws: Vec<ManagedAcw>,
    ports: Vec<Port>,
    inputs: Vec<AcwIn>,
    state: State,
    boot_at: Option<u64>,
    /// Cycle of the read whose data is awaited.
    read_at: Option<u64>,
    readmits: Vec<u32>,
    parked: Vec<[bool; 2]>,
    events: Vec<IllegalEvent>,
    cfg_writes: u64,
}

/// Prefix of the configuration port driving ACW number `k`.
pub fn cfg_port_prefix(te: &str, k: usize) -> String {
    format!("{te}.cfg{k}.")
}

pub fn reset_signal(te: &str, controller: &str) -> String {
    format!("{te}.{controller}_rst")
}

fn dir_index(d: Dir) -> usize {
    match d {
        Dir::Read => 0,
        Dir::Write => 1,
    }
}

impl Te {
    pub fn new(reg: &mut SignalRegistry, owner: usize, cfg: TeConfig, acws: Vec<ManagedAcw>) -> Result<Self, SimError> {
        let d = ResetDomain::System;
        let r = SignalKind::Registered;
        let mut ports = Vec::new();
        for (k, a) in acws.iter().enumerate() {
            if a.lacp.read.len() > a.n_read || a.lacp.write.len() > a.n_write {
                return Err(SimError::Config(format!(
                    "{}: policy for `{}` has more regions than the wrapper",
                    cfg.name, a.acw
                )));
            }
            let p = cfg_port_prefix(&cfg.name, k);
            let mut ids = Vec::new();
            for (f, w) in CFG_PORT_SIGNALS {
                ids.push(register(reg, owner, format!("{p}{f}"), w, r, d)?);
            }
            let rst = register(reg, owner, reset_signal(&cfg.name, &a.controller), 1, r, d)?;
            ports.push(Port { wen: ids[0], waddr: ids[1], wdata: ids[2], ren: ids[3], raddr: ids[4], rst });
        }
        let n = acws.len();
        Ok(Self {
            cfg,
            acws,
            ports,
            inputs: Vec::new(),
            state: State::Boot,
            boot_at: None,
            read_at: None,
            readmits: vec![0; n],
            parked: vec![[false; 2]; n],
            events: Vec::new(),
            cfg_writes: 0,
        })
    }

    pub fn events(&self) -> &[IllegalEvent] {
        &self.events
    }

    pub fn config(&self) -> &TeConfig {
        &self.cfg
    }

    /// Configuration writes issued so far.
    pub fn cfg_writes(&self) -> u64 {
        self.cfg_writes
    }

    pub fn booted(&self) -> bool {
        !matches!(self.state, State::Boot | State::Configure(_))
    }

    pub fn is_parked(&self, acw: &str, dir: Dir) -> Result<bool, TeError> {
        let k = self.index(acw)?;
        Ok(self.parked[k][dir_index(dir)])
    }

    pub fn index(&self, acw: &str) -> Result<usize, TeError> {
        self.acws.iter().position(|a| a.acw == acw).ok_or_else(|| TeError::UnknownAcw(acw.to_string()))
    }

    /// Decides what to do about an interrupt from `acw`, counting readmits.
    pub fn decide(&mut self, acw: &str) -> Result<Action, TeError> {
        let k = self.index(acw)?;
        Ok(match self.cfg.readmission {
            Readmission::AlwaysReadmit { after_reset: true } => Action::ResetAndReadmit,
            Readmission::AlwaysReadmit { after_reset: false } => Action::Readmit,
            Readmission::ReadmitUpToN { n } if self.readmits[k] < n => {
                self.readmits[k] += 1;
                Action::Readmit
            }
            Readmission::ReadmitUpToN { .. } | Readmission::PermanentDecouple => Action::Decouple,
        })
    }

    fn boot_writes(&self) -> VecDeque<(usize, u64, u64)> {
        let mut q = VecDeque::new();
        for (k, a) in self.acws.iter().enumerate() {
            for (write, list) in [(false, &a.lacp.read), (true, &a.lacp.write)] {
                for (i, r) in list.iter().enumerate().filter(|(_, r)| r.enabled()) {
                    let vals = [r.base & 0xFFFF_FFFF, r.base >> 32, r.size & 0xFFFF_FFFF, r.size >> 32];
                    for (f, v) in vals.into_iter().enumerate() {
                        q.push_back((k, regs::region(a.n_read, write, i, f), v));
                    }
                }
            }
            q.push_back((k, regs::CTRL, regs::CTRL_VALID));
        }
        q
    }

    fn write(&mut self, cx: &mut Cx<'_>, k: usize, off: u64, v: u64) {
        let p = self.ports[k];
        cx.set_clean(p.wen, 1);
        cx.set_clean(p.waddr, off);
        cx.set_clean(p.wdata, v);
        self.cfg_writes += 1;
    }

    /// Issues a read, or returns its data once it has arrived.
    fn read(&mut self, cx: &mut Cx<'_>, k: usize, off: u64) -> Option<u64> {
        let now = cx.cycle();
        match self.read_at {
            Some(t) if now >= t + 2 => {
                self.read_at = None;
                Some(cx.val(self.inputs[k].rdata))
            }
            Some(_) => None,
            None => {
                let p = self.ports[k];
                cx.set_clean(p.ren, 1);
                cx.set_clean(p.raddr, off);
                self.read_at = Some(now);
                None
            }
        }
    }

    fn idle_outputs(&self, cx: &mut Cx<'_>) {
        for p in &self.ports {
            for id in [p.wen, p.waddr, p.wdata, p.ren, p.raddr, p.rst] {
                cx.clear(id);
            }
        }
    }

    fn pending_interrupt(&self, cx: &Cx<'_>) -> Option<(usize, Dir)> {
        for (k, a) in self.inputs.iter().enumerate() {
            for (dir, id) in [(Dir::Read, a.intr_r), (Dir::Write, a.intr_w)] {
                if cx.bit(id) && !self.parked[k][dir_index(dir)] {
                    return Some((k, dir));
                }
            }
        }
        None
    }
}

impl Component for Te {
    fn name(&self) -> &str {
        &self.cfg.name
    }

    fn bind(&mut self, reg: &SignalRegistry) -> Result<(), SimError> {
        self.inputs = self
            .acws
            .iter()
            .map(|a| {
                let id = |s: &str| {
                    reg.id(&format!("{}.{s}", a.acw))
                        .map_err(|_| SimError::Config(TeError::UnknownAcw(a.acw.clone()).to_string()))
                };
                Ok(AcwIn { intr_r: id("intr_r")?, intr_w: id("intr_w")?, rdata: id("cfgp.rdata")? })
            })
            .collect::<Result<_, SimError>>()?;
        Ok(())
    }

    fn tick(&mut self, cx: &mut Cx<'_>) {
        self.idle_outputs(cx);
        let now = cx.cycle();
        if cx.in_reset() {
            self.state = State::Boot;
            self.boot_at = None;
            self.read_at = None;
            self.parked.iter_mut().for_each(|p| *p = [false; 2]);
            self.readmits.iter_mut().for_each(|n| *n = 0);
            return;
        }
        let state = std::mem::replace(&mut self.state, State::Idle);
        self.state = match state {
            State::Boot => {
                let at = *self.boot_at.get_or_insert(now + self.cfg.boot_delay);
                if now >= at {
                    let mut q = self.boot_writes();
                    match q.pop_front() {
                        Some((k, off, v)) => {
                            self.write(cx, k, off, v);
                            State::Configure(q)
                        }
                        None => State::Idle,
                    }
                } else {
                    State::Boot
                }
            }
            State::Configure(mut q) => match q.pop_front() {
                Some((k, off, v)) => {
                    self.write(cx, k, off, v);
                    State::Configure(q)
                }
                None => State::Idle,
            },
            State::Cooldown { until } if now < until => State::Cooldown { until },
            State::Idle | State::Cooldown { .. } => match self.pending_interrupt(cx) {
                Some((k, dir)) => {
                    let _ = self.read(cx, k, regs::ANOMALY[0]);
                    State::ReadAnomaly { k, dir, i: 0, words: [0; 5] }
                }
                None => State::Idle,
            },
            State::ReadAnomaly { k, dir, mut i, mut words } => match self.read(cx, k, regs::ANOMALY[i]) {
                Some(v) => {
                    words[i] = v;
                    i += 1;
                    if i < 5 {
                        let _ = self.read(cx, k, regs::ANOMALY[i]);
                        State::ReadAnomaly { k, dir, i, words }
                    } else {
                        let _ = self.read(cx, k, regs::STATUS);
                        State::Poll { k, dir, words }
                    }
                }
                None => State::ReadAnomaly { k, dir, i, words },
            },
            State::Poll { k, dir, words } => match self.read(cx, k, regs::STATUS) {
                Some(status) => {
                    let busy = status >> (4 + dir_index(dir)) & 1 == 1;
                    if busy {
                        let _ = self.read(cx, k, regs::STATUS);
                        State::Poll { k, dir, words }
                    } else {
                        let name = self.acws[k].acw.clone();
                        let action = self.decide(&name).expect("managed ACW");
                        self.events.push(IllegalEvent::from_words(&name, words, now, action));
                        match action {
                            Action::Decouple => {
                                self.parked[k][dir_index(dir)] = true;
                                State::Idle
                            }
                            Action::ResetAndReadmit => {
                                cx.set_clean(self.ports[k].rst, 1);
                                State::Pulse { k, dir }
                            }
                            Action::Readmit => {
                                let bit = if dir == Dir::Read { regs::CTRL_READMIT_R } else { regs::CTRL_READMIT_W };
                                self.write(cx, k, regs::CTRL, regs::CTRL_VALID | bit);
                                State::Cooldown { until: now + 2 }
                            }
                        }
                    }
                }
                None => State::Poll { k, dir, words },
            },
            State::Pulse { k, dir } => State::Readmit { k, dir },
            State::Readmit { k, dir } => {
                let bit = if dir == Dir::Read { regs::CTRL_READMIT_R } else { regs::CTRL_READMIT_W };
                self.write(cx, k, regs::CTRL, regs::CTRL_VALID | bit);
                State::Cooldown { until: now + 2 }
            }
        };
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn std::any::Any {
        self
    }
}
