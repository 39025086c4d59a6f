//! Dual memory: the frozen offline bank, the FIFO online bank of
//! pseudo-labelled samples, and uniform sampling over their union.

mod snapshot;

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use snapshot::{read_bank, write_bank, SNAPSHOT_VERSION};

use crate::error::{Error, Result};
use crate::nncore::Real;
use crate::seeds::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    GroundTruth,
    Pseudo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Capacity {
    Bounded(usize),
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankEntry<T: Real> {
    pub features: Vec<T>,
    pub label: usize,
    pub kind: LabelKind,
    pub inserted_at: u64,
    /// Copied from the offline bank when the online bank was initialized.
    pub seed: bool,
    /// Index into the originating dataset or stream, when known.
    pub source_index: Option<usize>,
    /// Offline domain index; never set for online samples.
    pub condition: Option<usize>,
}

/// Labelled sample store.
///
/// Offline banks are unbounded and frozen after construction; online banks
/// are bounded FIFO queues that accept only pseudo-labelled pushes.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank<T: Real> {
    entries: VecDeque<BankEntry<T>>,
    capacity: Capacity,
    frozen: bool,
    next_seq: u64,
}

/// Borrowed sample drawn from the joint bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplaySample<'a, T: Real> {
    pub features: &'a [T],
    pub label: usize,
    pub kind: LabelKind,
}

/// Position in the union `offline ++ online`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointIndex {
    Offline(usize),
    Online(usize),
}

/// Input record for [`MemoryBank::offline`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledSample<T: Real> {
    pub features: Vec<T>,
    pub label: usize,
    pub condition: Option<usize>,
    pub source_index: Option<usize>,
}

impl<T: Real> MemoryBank<T> {
    /// Frozen ground-truth bank.
    pub fn offline(samples: Vec<LabelledSample<T>>) -> Result<Self> {
        check_dims(samples.iter().map(|s| s.features.len()))?;
        let entries = samples
            .into_iter()
            .enumerate()
            .map(|(i, s)| BankEntry {
                features: s.features,
                label: s.label,
                kind: LabelKind::GroundTruth,
                inserted_at: i as u64,
                seed: false,
                source_index: s.source_index,
                condition: s.condition,
            })
            .collect::<VecDeque<_>>();
        let next_seq = entries.len() as u64;
        Ok(Self {
            entries,
            capacity: Capacity::Unbounded,
            frozen: true,
            next_seq,
        })
    }

    /// Empty FIFO bank with capacity `k`.
    pub fn online(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("online bank capacity must be >= 1"));
        }
        Ok(Self {
            entries: VecDeque::with_capacity(k),
            capacity: Capacity::Bounded(k),
            frozen: false,
            next_seq: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &BankEntry<T>> {
        self.entries.iter()
    }

    pub fn get(&self, i: usize) -> Option<&BankEntry<T>> {
        self.entries.get(i)
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.entries.front().map(|e| e.features.len())
    }

    fn check_writable(&self) -> Result<usize> {
        match (self.frozen, self.capacity) {
            (false, Capacity::Bounded(k)) => Ok(k),
            _ => Err(Error::contract("offline memory bank is frozen")),
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        match self.feature_dim() {
            Some(d) if d != len => Err(Error::shape("bank entry features", d, len)),
            _ => Ok(()),
        }
    }

    /// Appends a pseudo-labelled sample, evicting the oldest entry when full.
    pub fn push_fifo(
        &mut self,
        features: Vec<T>,
        label: usize,
        source_index: Option<usize>,
    ) -> Result<Option<BankEntry<T>>> {
        let k = self.check_writable()?;
        self.check_dim(features.len())?;
        let entry = BankEntry {
            features,
            label,
            kind: LabelKind::Pseudo,
            inserted_at: self.next_seq,
            seed: false,
            source_index,
            condition: None,
        };
        Ok(self.push_entry(entry, k))
    }

    fn push_entry(&mut self, entry: BankEntry<T>, k: usize) -> Option<BankEntry<T>> {
        self.next_seq += 1;
        self.entries.push_back(entry);
        if self.entries.len() > k {
            self.entries.pop_front()
        } else {
            None
        }
    }

    pub(crate) fn from_parts(
        entries: VecDeque<BankEntry<T>>,
        capacity: Capacity,
        frozen: bool,
        next_seq: u64,
    ) -> Result<Self> {
        if let Capacity::Bounded(k) = capacity {
            if entries.len() > k || k == 0 {
                return Err(Error::contract("bank snapshot exceeds its capacity"));
            }
        }
        if entries
            .iter()
            .zip(entries.iter().skip(1))
            .any(|(a, b)| a.inserted_at >= b.inserted_at)
            || entries.back().is_some_and(|e| e.inserted_at >= next_seq)
        {
            return Err(Error::contract(
                "bank snapshot sequence numbers are not increasing",
            ));
        }
        check_dims(entries.iter().map(|e| e.features.len()))?;
        Ok(Self {
            entries,
            capacity,
            frozen,
            next_seq,
        })
    }

    pub(crate) fn next_seq(&self) -> u64 {
        self.next_seq
    }
}

fn check_dims(mut lens: impl Iterator<Item = usize>) -> Result<()> {
    if let Some(first) = lens.next() {
        if let Some(bad) = lens.find(|&l| l != first) {
            return Err(Error::shape("bank entry features", first, bad));
        }
    }
    Ok(())
}

/// Online bank of capacity `k` seeded with `n_seed` distinct copies of
/// offline entries. Seeds keep their ground-truth labels.
pub fn init_online_bank<T: Real>(
    offline_bank: &MemoryBank<T>,
    k: usize,
    n_seed: usize,
    seed: u64,
) -> Result<MemoryBank<T>> {
    let mut bank = MemoryBank::online(k)?;
    if n_seed > k {
        return Err(Error::contract(format!(
            "n_seed {n_seed} exceeds capacity {k}"
        )));
    }
    if n_seed > offline_bank.len() {
        return Err(Error::contract(format!(
            "n_seed {n_seed} exceeds offline bank size {}",
            offline_bank.len()
        )));
    }
    let mut rng = rng_for(seed, "online-bank-seed", &[]);
    let mut picks = index::sample(&mut rng, offline_bank.len(), n_seed).into_vec();
    // keep offline order so seed FIFO order is reproducible and readable
    picks.sort_unstable();
    for i in picks {
        let src = &offline_bank.entries[i];
        let entry = BankEntry {
            features: src.features.clone(),
            label: src.label,
            kind: src.kind,
            inserted_at: bank.next_seq,
            seed: true,
            source_index: src.source_index,
            condition: src.condition,
        };
        bank.push_entry(entry, k);
    }
    Ok(bank)
}

fn joint_get<'a, T: Real>(
    off: &'a MemoryBank<T>,
    on: &'a MemoryBank<T>,
    i: usize,
) -> ReplaySample<'a, T> {
    let e = if i < off.len() {
        &off.entries[i]
    } else {
        &on.entries[i - off.len()]
    };
    ReplaySample {
        features: &e.features,
        label: e.label,
        kind: e.kind,
    }
}

/// Uniform draw over `off ∪ on`: without replacement when `batch_size` fits
/// in the union, with replacement otherwise.
pub fn sample_joint_batch<'a, T: Real, R: Rng + ?Sized>(
    off: &'a MemoryBank<T>,
    on: &'a MemoryBank<T>,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<ReplaySample<'a, T>>> {
    let total = off.len() + on.len();
    if total == 0 {
        return Err(Error::EmptyBank("joint memory bank"));
    }
    let picks: Vec<usize> = if batch_size <= total {
        index::sample(rng, total, batch_size).into_vec()
    } else {
        (0..batch_size)
            .map(|_| rng.random_range(0..total))
            .collect()
    };
    Ok(picks.into_iter().map(|i| joint_get(off, on, i)).collect())
}

/// One epoch over `off ∪ on`: a shuffled permutation cut into batches.
pub fn joint_epoch_batches<T: Real, R: Rng + ?Sized>(
    off: &MemoryBank<T>,
    on: &MemoryBank<T>,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<JointIndex>>> {
    if batch_size == 0 {
        return Err(Error::config("replay batch size must be >= 1"));
    }
    let total = off.len() + on.len();
    if total == 0 {
        return Err(Error::EmptyBank("joint memory bank"));
    }
    let perm = index::sample(rng, total, total).into_vec();
    Ok(perm
        .chunks(batch_size)
        .map(|c| {
            c.iter()
                .map(|&i| {
                    if i < off.len() {
                        JointIndex::Offline(i)
                    } else {
                        JointIndex::Online(i - off.len())
                    }
                })
                .collect()
        })
        .collect())
}

pub fn resolve_joint<'a, T: Real>(
    off: &'a MemoryBank<T>,
    on: &'a MemoryBank<T>,
    idx: JointIndex,
) -> &'a BankEntry<T> {
    match idx {
        JointIndex::Offline(i) => &off.entries[i],
        JointIndex::Online(i) => &on.entries[i],
    }
}
