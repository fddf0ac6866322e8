// SPDX-License-Identifier: Apache-2.0

//! Hierarchical signal registry.

use std::collections::HashMap;

use super::taint::TaintSet;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignalId(pub u32);

impl SignalId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// How a signal gets its value each cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Written during the sequential phase; holds its value otherwise.
    Registered,
    /// Recomputed during the settle phase from registered signals only.
    Comb,
    /// Driven by the kernel itself (the reset line).
    Input,
}

/// Which reset line clears a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetDomain {
    /// Cleared while `ARESETN` is low.
    System,
    /// Owned by an untrusted agent with its own reset.
    Local,
}

#[derive(Debug, Clone)]
pub struct SignalMeta {
    pub name: String,
    pub width: u8,
    pub kind: SignalKind,
    pub default: u64,
    pub domain: ResetDomain,
    pub owner: usize,
}

/// A value and the taint labels it carries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tv {
    pub v: u64,
    pub t: TaintSet,
}

impl Tv {
    pub fn new(v: u64, t: TaintSet) -> Self {
        Self { v, t }
    }

    pub fn clean(v: u64) -> Self {
        Self { v, t: TaintSet::new() }
    }

    pub fn bit(&self) -> bool {
        self.v != 0
    }
}

pub fn mask(width: u8) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Debug, Clone, Default)]
pub struct SignalRegistry {
    meta: Vec<SignalMeta>,
    index: HashMap<String, SignalId>,
    values: Vec<u64>,
    taints: Vec<TaintSet>,
}

impl SignalRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, meta: SignalMeta) -> Result<SignalId, SimError> {
        if meta.width == 0 || meta.width > 64 {
            return Err(SimError::BadWidth { name: meta.name, width: meta.width });
        }
        if self.index.contains_key(&meta.name) {
            return Err(SimError::DuplicateSignal(meta.name));
        }
        let id = SignalId(self.meta.len() as u32);
        self.index.insert(meta.name.clone(), id);
        self.values.push(meta.default & mask(meta.width));
        self.taints.push(TaintSet::new());
        self.meta.push(meta);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<SignalId, SimError> {
        self.index.get(name).copied().ok_or_else(|| SimError::UnknownSignal(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn meta(&self, id: SignalId) -> &SignalMeta {
        &self.meta[id.index()]
    }

    pub fn name(&self, id: SignalId) -> &str {
        &self.meta[id.index()].name
    }

    pub fn value(&self, id: SignalId) -> u64 {
        self.values[id.index()]
    }

    pub fn taint(&self, id: SignalId) -> &TaintSet {
        &self.taints[id.index()]
    }

    pub fn get(&self, id: SignalId) -> Tv {
        Tv::new(self.values[id.index()], self.taints[id.index()].clone())
    }

    /// Committed value and taint of a signal, by name.
    pub fn read(&self, name: &str) -> Result<(u64, TaintSet), SimError> {
        let id = self.id(name)?;
        Ok((self.value(id), self.taint(id).clone()))
    }

    pub fn ids(&self) -> impl Iterator<Item = SignalId> {
        (0..self.meta.len() as u32).map(SignalId)
    }

    /// Signal IDs whose names start with `prefix`, in registration order.
    pub fn matching(&self, prefix: &str) -> Vec<SignalId> {
        self.ids().filter(|&id| self.name(id).starts_with(prefix)).collect()
    }

    pub(crate) fn set(&mut self, id: SignalId, v: u64, t: TaintSet) {
        let i = id.index();
        self.values[i] = v & mask(self.meta[i].width);
        self.taints[i] = t;
    }

    pub(crate) fn add_taint(&mut self, id: SignalId, t: &TaintSet) {
        self.taints[id.index()].union_with(t);
    }

    pub(crate) fn force_value(&mut self, id: SignalId, v: u64) {
        let i = id.index();
        self.values[i] = v & mask(self.meta[i].width);
    }

    /// Full snapshot of values and taints, for determinism checks.
    pub fn dump(&self) -> Vec<(String, u64, TaintSet)> {
        self.ids().map(|id| (self.name(id).to_string(), self.value(id), self.taint(id).clone())).collect()
    }
}
