// SPDX-License-Identifier: Apache-2.0

//! Builds a simulation from a declarative system description.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::acw::{Acw, AcwConfig, Lacp, Region};
use crate::agents::te::{cfg_port_prefix, reset_signal};
use crate::agents::{Dma, DmaProgram, ManagedAcw, Memory, MemoryConfig, Te, TeConfig};
use crate::fabric::{AddressMap, Crossbar, FabricConfig, FilterMode};
use crate::kernel::{Channel, Component, Injector, ResetSchedule, SignalRegistry, SimError, Simulation, TaintSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcwSpec {
    pub name: String,
    pub controller: String,
    #[serde(default)]
    pub config: AcwConfig,
    /// Policy written by the trusted entity at boot.
    #[serde(default)]
    pub lacp: Lacp,
    /// Label error payloads with a taint named after the wrapper.
    #[serde(default)]
    pub origin_label: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FabricSpec {
    #[serde(default = "xbar")]
    pub name: String,
    /// Manager ports in order; all controllers when empty.
    #[serde(default)]
    pub managers: Vec<String>,
    /// Peripheral ports in order; all peripherals when empty.
    #[serde(default)]
    pub subordinates: Vec<String>,
    #[serde(default = "depth")]
    pub queue_depth: usize,
    #[serde(default = "one")]
    pub pipeline: u32,
    #[serde(default)]
    pub filter: FilterMode,
}

fn xbar() -> String {
    "xbar".into()
}

fn depth() -> usize {
    8
}

fn one() -> u32 {
    1
}

impl Default for FabricSpec {
    fn default() -> Self {
        Self {
            name: xbar(),
            managers: Vec::new(),
            subordinates: Vec::new(),
            queue_depth: depth(),
            pipeline: 1,
            filter: FilterMode::PassThrough,
        }
    }
}

/// Always-on taint source: every signal under each prefix carries `label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintSource {
    pub label: String,
    pub prefixes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TopologyConfig {
    #[serde(default)]
    pub controllers: Vec<String>,
    #[serde(default)]
    pub acws: Vec<AcwSpec>,
    #[serde(default)]
    pub fabric: FabricSpec,
    #[serde(default)]
    pub peripherals: Vec<MemoryConfig>,
    #[serde(default)]
    pub te: Option<TeConfig>,
    #[serde(default)]
    pub taint: Vec<TaintSource>,
    /// Cycles with `ARESETN` low; cycles 0..3 when absent.
    #[serde(default)]
    pub reset_low: Option<Vec<(u64, u64)>>,
}

impl TopologyConfig {
    fn check_names(&self) -> Result<(), SimError> {
        let mut seen = HashSet::new();
        let te = self.te.as_ref().map(|t| t.name.clone());
        let all = self
            .controllers
            .iter()
            .chain(self.acws.iter().map(|a| &a.name))
            .chain(std::iter::once(&self.fabric.name))
            .chain(self.peripherals.iter().map(|p| &p.name))
            .chain(te.iter());
        for n in all {
            if n.is_empty() || n.contains('.') {
                return Err(SimError::Config(format!("invalid component name `{n}`")));
            }
            if !seen.insert(n.clone()) {
                return Err(SimError::DuplicateComponent(n.clone()));
            }
        }
        let mut wrapped = HashSet::new();
        for a in &self.acws {
            if !self.controllers.contains(&a.controller) {
                return Err(SimError::Config(format!("{}: unknown controller `{}`", a.name, a.controller)));
            }
            if !wrapped.insert(&a.controller) {
                return Err(SimError::Config(format!("controller `{}` is wrapped twice", a.controller)));
            }
        }
        Ok(())
    }

    /// Manager and peripheral names in port order.
    pub fn ports(&self) -> (Vec<String>, Vec<String>) {
        let m = if self.fabric.managers.is_empty() { self.controllers.clone() } else { self.fabric.managers.clone() };
        let s = if self.fabric.subordinates.is_empty() {
            self.peripherals.iter().map(|p| p.name.clone()).collect()
        } else {
            self.fabric.subordinates.clone()
        };
        (m, s)
    }

    pub fn acw_for(&self, controller: &str) -> Option<&AcwSpec> {
        self.acws.iter().find(|a| a.controller == controller)
    }

    /// Prefix of the signals a controller's requests leave the wrapper on.
    pub fn manager_prefix(&self, controller: &str) -> String {
        match self.acw_for(controller) {
            Some(a) => format!("{}.s.", a.name),
            None => format!("{controller}.m."),
        }
    }

    /// Counts of top-level components the built simulation will hold.
    pub fn component_count(&self) -> usize {
        self.controllers.len() + self.acws.len() + 1 + self.peripherals.len() + usize::from(self.te.is_some())
    }

    /// Assembles the simulation; controllers without a program stay idle.
    pub fn build(&self, programs: &BTreeMap<String, DmaProgram>) -> Result<Simulation, SimError> {
        self.check_names()?;
        for name in programs.keys() {
            if !self.controllers.contains(name) {
                return Err(SimError::Config(format!("program for unknown controller `{name}`")));
            }
        }
        let (managers, subs) = self.ports();
        let mut used = HashSet::new();
        for m in &managers {
            if !self.controllers.contains(m) || !used.insert(m) {
                return Err(SimError::Config(format!("fabric manager `{m}` is unknown or repeated")));
            }
        }
        for c in &self.controllers {
            if !managers.contains(c) {
                return Err(SimError::Config(format!("controller `{c}` is not attached to the fabric")));
            }
        }
        let periph = |n: &str| self.peripherals.iter().position(|p| p.name == n);
        let mut entries = Vec::new();
        for (j, s) in subs.iter().enumerate() {
            let p = periph(s).ok_or_else(|| SimError::Config(format!("fabric port `{s}` is not a peripheral")))?;
            entries.push((j, Region::new(self.peripherals[p].base, self.peripherals[p].size)));
        }
        let map = AddressMap::new(entries)?;
        let fab = &self.fabric.name;
        let te_name = self.te.as_ref().map(|t| t.name.clone());

        let mut reg = Simulation::registry_with_reset();
        let mut comps: Vec<Box<dyn Component>> = Vec::new();
        for c in &self.controllers {
            let i = managers.iter().position(|m| m == c).expect("attached");
            let input = match self.acw_for(c) {
                Some(a) => format!("{}.m.", a.name),
                None => format!("{fab}.m{i}."),
            };
            let rst = match (&te_name, self.acw_for(c)) {
                (Some(t), Some(_)) => Some(reset_signal(t, c)),
                _ => None,
            };
            let prog = programs.get(c).cloned().unwrap_or_default();
            let owner = comps.len();
            comps.push(Box::new(Dma::new(&mut reg, owner, c, prog, &input, rst.as_deref())?));
        }
        let mut origins = Vec::new();
        for (k, a) in self.acws.iter().enumerate() {
            let i = managers.iter().position(|m| m == &a.controller).expect("attached");
            let te_port = te_name.as_ref().map(|t| cfg_port_prefix(t, k));
            let owner = comps.len();
            comps.push(Box::new(Acw::new(
                &mut reg,
                owner,
                &a.name,
                a.config.clone(),
                &format!("{}.m.", a.controller),
                &format!("{fab}.m{i}."),
                te_port.as_deref(),
            )?));
            if a.origin_label {
                origins.push(a.name.clone());
            }
        }
        let fcfg = FabricConfig {
            name: fab.clone(),
            managers: managers.clone(),
            subordinates: subs.clone(),
            queue_depth: self.fabric.queue_depth,
            pipeline: self.fabric.pipeline,
            filter: self.fabric.filter.clone(),
        };
        let m_inputs = managers.iter().map(|m| self.manager_prefix(m)).collect();
        let s_inputs = subs.iter().map(|s| format!("{s}.s.")).collect();
        let owner = comps.len();
        comps.push(Box::new(Crossbar::new(&mut reg, owner, fcfg, map, m_inputs, s_inputs)?));
        for (j, s) in subs.iter().enumerate() {
            let p = &self.peripherals[periph(s).expect("checked")];
            let owner = comps.len();
            comps.push(Box::new(Memory::new(&mut reg, owner, p.clone(), &format!("{fab}.s{j}."))?));
        }
        for p in &self.peripherals {
            if !subs.contains(&p.name) {
                return Err(SimError::Config(format!("peripheral `{}` is not attached to the fabric", p.name)));
            }
        }
        if let Some(t) = &self.te {
            let managed = self
                .acws
                .iter()
                .map(|a| ManagedAcw {
                    acw: a.name.clone(),
                    controller: a.controller.clone(),
                    lacp: a.lacp.clone(),
                    n_read: a.config.n_read,
                    n_write: a.config.n_write,
                })
                .collect();
            let owner = comps.len();
            comps.push(Box::new(Te::new(&mut reg, owner, t.clone(), managed)?));
        }

        let resets = match &self.reset_low {
            Some(low) => ResetSchedule { low: low.clone() },
            None => ResetSchedule::default(),
        };
        let mut sim = Simulation::new(reg, comps, resets)?;
        for name in origins {
            let label = sim.declare_taint(name.clone());
            if let Some(a) = sim.component_mut::<Acw>(&name) {
                a.set_origin(TaintSet::single(label));
            }
        }
        for src in &self.taint {
            let label = sim.declare_taint(src.label.clone());
            let targets: Vec<_> = src.prefixes.iter().flat_map(|p| sim.registry().matching(p)).collect();
            if targets.is_empty() {
                return Err(SimError::Config(format!("taint source `{}` matches no signal", src.label)));
            }
            sim.add_injector(Injector { label, targets, when: None });
        }
        add_channels(&mut sim, self, &managers, &subs)?;
        Ok(sim)
    }
}

/// Registers the valid/ready channels of every interface for stability checks.
fn add_channels(
    sim: &mut Simulation,
    cfg: &TopologyConfig,
    managers: &[String],
    subs: &[String],
) -> Result<(), SimError> {
    let fab = &cfg.fabric.name;
    let mut links: Vec<(String, String, Option<String>)> = Vec::new();
    for (i, c) in managers.iter().enumerate() {
        let rst = match (&cfg.te, cfg.acw_for(c)) {
            (Some(t), Some(_)) => Some(reset_signal(&t.name, c)),
            _ => None,
        };
        match cfg.acw_for(c) {
            Some(a) => {
                links.push((format!("{c}.m."), format!("{}.m.", a.name), rst.clone()));
                links.push((format!("{}.s.", a.name), format!("{fab}.m{i}."), rst));
            }
            None => links.push((format!("{c}.m."), format!("{fab}.m{i}."), None)),
        }
    }
    for (j, s) in subs.iter().enumerate() {
        links.push((format!("{fab}.s{j}."), format!("{s}.s."), None));
    }
    let reg: &SignalRegistry = sim.registry();
    let mut chans = Vec::new();
    for (m, s, rst) in links {
        let id = |n: String| reg.id(&n);
        let rst = rst.map(|r| reg.id(&r)).transpose()?;
        let specs: [(&str, &str, &str, &[&str]); 5] = [
            ("AR", "ARVALID", "ARREADY", &["ARID", "ARADDR", "ARLEN", "ARSIZE", "ARBURST"]),
            ("AW", "AWVALID", "AWREADY", &["AWID", "AWADDR", "AWLEN", "AWSIZE", "AWBURST"]),
            ("W", "WVALID", "WREADY", &["WDATA", "WLAST"]),
            ("R", "RVALID", "RREADY", &["RID", "RDATA", "RRESP", "RLAST"]),
            ("B", "BVALID", "BREADY", &["BID", "BRESP"]),
        ];
        for (ch, v, r, payload) in specs {
            let from_manager = matches!(ch, "AR" | "AW" | "W");
            let (vp, rp) = if from_manager { (&m, &s) } else { (&s, &m) };
            chans.push(Channel {
                name: format!("{m}{ch}"),
                valid: id(format!("{vp}{v}"))?,
                ready: id(format!("{rp}{r}"))?,
                payload: payload.iter().map(|p| id(format!("{vp}{p}"))).collect::<Result<_, _>>()?,
                reset: rst,
            });
        }
    }
    for c in chans {
        sim.add_channel(c);
    }
    Ok(())
}
