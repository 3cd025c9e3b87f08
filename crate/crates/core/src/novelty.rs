//! Novelty tables.
//!
//! A table records, per partition of heuristic values, which atoms and which
//! unordered atom pairs have been true in some recorded state. The novelty of
//! a state is the size of the smallest tuple it makes true for the first time
//! in its partition: 1, 2, or [`NoveltyValue::Beyond`] when no tuple up to the
//! table's level cap is new.
//!
//! The same structure serves two purposes. Search tables record every state
//! evaluated by an agent and are updated on evaluation. Outgoing tables record
//! only the public projections of states that were actually transmitted, so
//! they are updated in two phases: [`NoveltyTable::probe`] computes the value
//! without side effects and [`NoveltyTable::commit`] records the probed state
//! once it has been sent.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static NEXT_TABLE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NoveltyValue {
    One,
    Two,
    /// No new tuple up to the level cap.
    Beyond,
}

impl NoveltyValue {
    pub fn rank(self) -> u8 {
        match self {
            NoveltyValue::One => 1,
            NoveltyValue::Two => 2,
            NoveltyValue::Beyond => 3,
        }
    }

    /// Numeric outgoing novelty; "no new tuple" maps to `num_public + 1`.
    pub fn outgoing_value(self, num_public: usize) -> usize {
        match self {
            NoveltyValue::One => 1,
            NoveltyValue::Two => 2,
            NoveltyValue::Beyond => num_public + 1,
        }
    }
}

/// What the atom ids of a table range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomUniverse {
    /// An agent's known facts plus interned foreign tokens; grows on demand.
    Search,
    /// Public facts only, by public index.
    Outgoing { size: usize },
}

pub type PartitionKey = Vec<i64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NoveltyError {
    #[error("probe was taken on a different table")]
    ForeignProbe,
}

#[derive(Debug, Clone, Default)]
struct Partition {
    atoms: FixedBitSet,
    pairs: FixedBitSet,
}

/// Index of the unordered pair `{a, b}` with `a < b`. Adding larger atoms
/// never moves existing indices, so the set can grow in place.
fn pair_index(a: u32, b: u32) -> usize {
    debug_assert!(a < b);
    let (a, b) = (a as usize, b as usize);
    b * (b - 1) / 2 + a
}

fn grow_insert(set: &mut FixedBitSet, i: usize) {
    if i >= set.len() {
        set.grow((i + 1).next_power_of_two());
    }
    set.insert(i);
}

impl Partition {
    fn novelty(&self, atoms: &[u32], max_level: u8) -> NoveltyValue {
        if atoms.iter().any(|a| !self.atoms.contains(*a as usize)) {
            return NoveltyValue::One;
        }
        if max_level >= 2 {
            for (i, a) in atoms.iter().enumerate() {
                for b in &atoms[i + 1..] {
                    if !self.pairs.contains(pair_index(*a, *b)) {
                        return NoveltyValue::Two;
                    }
                }
            }
        }
        NoveltyValue::Beyond
    }

    fn insert(&mut self, atoms: &[u32], max_level: u8) {
        for a in atoms {
            grow_insert(&mut self.atoms, *a as usize);
        }
        if max_level >= 2 {
            for (i, a) in atoms.iter().enumerate() {
                for b in &atoms[i + 1..] {
                    grow_insert(&mut self.pairs, pair_index(*a, *b));
                }
            }
        }
    }
}

/// Result of a side-effect-free novelty evaluation, redeemable once with
/// [`NoveltyTable::commit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    table: u64,
    key: PartitionKey,
    atoms: Vec<u32>,
    value: NoveltyValue,
}

impl Probe {
    pub fn value(&self) -> NoveltyValue {
        self.value
    }

    pub fn key(&self) -> &[i64] {
        &self.key
    }

    pub fn atoms(&self) -> &[u32] {
        &self.atoms
    }
}

#[derive(Debug, Clone)]
pub struct NoveltyTable {
    id: u64,
    max_level: u8,
    universe: AtomUniverse,
    partitions: HashMap<PartitionKey, Partition>,
}

impl NoveltyTable {
    /// `max_level` is 1 or 2.
    pub fn new(universe: AtomUniverse, max_level: u8) -> Self {
        assert!((1..=2).contains(&max_level), "novelty level cap must be 1 or 2");
        NoveltyTable {
            id: NEXT_TABLE_ID.fetch_add(1, Ordering::Relaxed),
            max_level,
            universe,
            partitions: HashMap::new(),
        }
    }

    pub fn max_level(&self) -> u8 {
        self.max_level
    }

    pub fn universe(&self) -> AtomUniverse {
        self.universe
    }

    pub fn num_partitions(&self) -> usize {
        self.partitions.len()
    }

    fn normalize(&self, atoms: &[u32]) -> Vec<u32> {
        let mut v = atoms.to_vec();
        v.sort_unstable();
        v.dedup();
        if let AtomUniverse::Outgoing { size } = self.universe {
            if let Some(bad) = v.iter().find(|a| **a as usize >= size) {
                panic!("atom {bad} outside outgoing universe of size {size}");
            }
        }
        v
    }

    fn value_of(&self, atoms: &[u32], key: &[i64]) -> NoveltyValue {
        match self.partitions.get(key) {
            Some(p) => p.novelty(atoms, self.max_level),
            None if atoms.is_empty() => NoveltyValue::Beyond,
            None => NoveltyValue::One,
        }
    }

    /// Compute the novelty of `atoms` in partition `key`, then record it.
    pub fn evaluate_and_insert(&mut self, atoms: &[u32], key: &[i64]) -> NoveltyValue {
        let atoms = self.normalize(atoms);
        let value = self.value_of(&atoms, key);
        self.partitions.entry(key.to_vec()).or_default().insert(&atoms, self.max_level);
        value
    }

    /// Compute the novelty of `atoms` in partition `key` without recording.
    pub fn probe(&self, atoms: &[u32], key: &[i64]) -> Probe {
        let atoms = self.normalize(atoms);
        let value = self.value_of(&atoms, key);
        Probe { table: self.id, key: key.to_vec(), atoms, value }
    }

    /// Record a probed state.
    pub fn commit(&mut self, probe: &Probe) -> Result<(), NoveltyError> {
        if probe.table != self.id {
            return Err(NoveltyError::ForeignProbe);
        }
        self.partitions.entry(probe.key.clone()).or_default().insert(&probe.atoms, self.max_level);
        Ok(())
    }
}
