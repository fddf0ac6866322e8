// SPDX-License-Identifier: Apache-2.0

//! Shadow taint labels carried alongside every signal value.

use std::fmt;

/// Small-integer identifier of a taint source. Names live in [`TaintNames`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaintId(pub u32);

/// Set of taint labels, stored as a growable bitset.
///
/// The empty set means "untainted" and never allocates.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct TaintSet {
    words: Vec<u64>,
}

impl TaintSet {
    pub const fn new() -> Self {
        Self { words: Vec::new() }
    }

    pub fn single(id: TaintId) -> Self {
        let mut s = Self::new();
        s.insert(id);
        s
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn insert(&mut self, id: TaintId) {
        let (w, b) = (id.0 as usize / 64, id.0 % 64);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << b;
    }

    pub fn contains(&self, id: TaintId) -> bool {
        let (w, b) = (id.0 as usize / 64, id.0 % 64);
        self.words.get(w).is_some_and(|x| x & (1 << b) != 0)
    }

    pub fn union_with(&mut self, other: &TaintSet) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn union(&self, other: &TaintSet) -> TaintSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn is_subset(&self, other: &TaintSet) -> bool {
        self.words.iter().enumerate().all(|(i, w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = TaintId> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(i, &w)| (0..64u32).filter(move |b| w & (1 << b) != 0).map(move |b| TaintId(i as u32 * 64 + b)))
    }

    pub fn clear(&mut self) {
        self.words.clear();
    }
}

impl fmt::Debug for TaintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|t| t.0)).finish()
    }
}

impl FromIterator<TaintId> for TaintSet {
    fn from_iter<I: IntoIterator<Item = TaintId>>(iter: I) -> Self {
        let mut s = TaintSet::new();
        for id in iter {
            s.insert(id);
        }
        s
    }
}

/// Union of several taint sets.
pub fn union_all<'a>(sets: impl IntoIterator<Item = &'a TaintSet>) -> TaintSet {
    let mut out = TaintSet::new();
    for s in sets {
        out.union_with(s);
    }
    out
}

/// Label table. IDs are handed out in declaration order.
#[derive(Debug, Clone, Default)]
pub struct TaintNames {
    names: Vec<String>,
}

impl TaintNames {
    pub fn declare(&mut self, name: impl Into<String>) -> TaintId {
        let name = name.into();
        if let Some(i) = self.names.iter().position(|n| *n == name) {
            return TaintId(i as u32);
        }
        self.names.push(name);
        TaintId(self.names.len() as u32 - 1)
    }

    pub fn lookup(&self, name: &str) -> Option<TaintId> {
        self.names.iter().position(|n| n == name).map(|i| TaintId(i as u32))
    }

    pub fn name(&self, id: TaintId) -> &str {
        self.names.get(id.0 as usize).map(String::as_str).unwrap_or("?")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Human-readable label names of a set, in ID order.
    pub fn describe(&self, set: &TaintSet) -> Vec<String> {
        set.iter().map(|t| self.name(t).to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_is_untainted() {
        let s = TaintSet::new();
        assert!(s.is_empty());
        assert!(!s.contains(TaintId(0)));
        assert_eq!(s.len(), 0);
    }

    #[test]
    fn high_ids_grow_the_set() {
        let mut s = TaintSet::single(TaintId(1500));
        s.insert(TaintId(3));
        assert!(s.contains(TaintId(1500)));
        assert!(s.contains(TaintId(3)));
        assert_eq!(s.iter().map(|t| t.0).collect::<Vec<_>>(), vec![3, 1500]);
    }

    #[test]
    fn names_are_assigned_in_order() {
        let mut n = TaintNames::default();
        assert_eq!(n.declare("C1"), TaintId(0));
        assert_eq!(n.declare("C2"), TaintId(1));
        assert_eq!(n.declare("C1"), TaintId(0));
        let s: TaintSet = [TaintId(1)].into_iter().collect();
        assert_eq!(n.describe(&s), vec!["C2"]);
    }

    proptest! {
        #[test]
        fn union_is_superset_of_inputs(a in proptest::collection::vec(0u32..300, 0..20),
                                       b in proptest::collection::vec(0u32..300, 0..20)) {
            let sa: TaintSet = a.iter().map(|&x| TaintId(x)).collect();
            let sb: TaintSet = b.iter().map(|&x| TaintId(x)).collect();
            let u = sa.union(&sb);
            prop_assert!(sa.is_subset(&u));
            prop_assert!(sb.is_subset(&u));
            prop_assert!(u.iter().all(|t| sa.contains(t) || sb.contains(t)));
        }
    }
}
