use std::collections::BTreeMap;

use rand::seq::index;

use super::trainer::OfflineDataset;
use crate::error::{Error, Result};
use crate::memory::{LabelledSample, MemoryBank};
use crate::nncore::Real;
use crate::seeds::rng_for;

/// A `(condition, fault)` cell that had fewer samples than requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellShortfall {
    pub condition: usize,
    pub fault: usize,
    pub available: usize,
    pub requested: usize,
}

#[derive(Debug, Clone)]
pub struct OfflineBank<T: Real> {
    pub bank: MemoryBank<T>,
    /// Dataset indices drawn per `(condition, fault)` cell, in bank order.
    pub cells: BTreeMap<(usize, usize), Vec<usize>>,
    pub shortfalls: Vec<CellShortfall>,
}

/// Union over every `(condition, fault)` cell of up to `per_cell` samples
/// drawn uniformly without replacement, stored with ground-truth labels.
pub fn init_offline_bank<T: Real>(
    dataset: &OfflineDataset<T>,
    per_cell: usize,
    seed: u64,
) -> Result<OfflineBank<T>> {
    if per_cell == 0 {
        return Err(Error::config("per-cell bank size must be >= 1"));
    }
    let mut members: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, (&f, &c)) in dataset.faults.iter().zip(&dataset.conditions).enumerate() {
        members.entry((c, f)).or_default().push(i);
    }

    let mut rng = rng_for(seed, "offline-bank", &[]);
    let mut cells = BTreeMap::new();
    let mut shortfalls = Vec::new();
    let mut samples = Vec::new();
    for condition in 0..dataset.n_conditions {
        for fault in 0..dataset.n_faults {
            let pool = members
                .get(&(condition, fault))
                .ok_or(Error::Coverage { condition, fault })?;
            let take = per_cell.min(pool.len());
            if take < per_cell {
                log::warn!(
                    "offline bank cell (condition {condition}, fault {fault}) has only {} samples, wanted {per_cell}",
                    pool.len()
                );
                shortfalls.push(CellShortfall {
                    condition,
                    fault,
                    available: pool.len(),
                    requested: per_cell,
                });
            }
            let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), take)
                .into_iter()
                .map(|j| pool[j])
                .collect();
            picked.sort_unstable();
            for &i in &picked {
                samples.push(LabelledSample {
                    features: dataset.x.row(i).to_vec(),
                    label: fault,
                    condition: Some(condition),
                    source_index: Some(i),
                });
            }
            cells.insert((condition, fault), picked);
        }
    }
    Ok(OfflineBank {
        bank: MemoryBank::offline(samples)?,
        cells,
        shortfalls,
    })
}
