//! Binary bank snapshot for resumable experiments.
//!
//! ```text
//! magic b"OTMB", version u32, width u8,
//! capacity u64 (0 = unbounded), frozen u8, next_seq u64, count u64, dim u64,
//! per entry: label u64, kind u8, seed u8, inserted_at u64,
//!            source_index i64 (-1 = none), condition i64 (-1 = none), features
//! ```

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{BankEntry, Capacity, LabelKind, MemoryBank};
use crate::error::{Error, Result};
use crate::nncore::Real;

pub const SNAPSHOT_VERSION: u32 = 1;

fn opt_to_i64(v: Option<usize>) -> i64 {
    v.map_or(-1, |x| x as i64)
}

fn i64_to_opt(v: i64) -> Option<usize> {
    (v >= 0).then_some(v as usize)
}

pub fn write_bank<T: Real, W: Write>(bank: &MemoryBank<T>, w: &mut W) -> Result<()> {
    w.write_all(b"OTMB")?;
    w.write_u32::<LittleEndian>(SNAPSHOT_VERSION)?;
    w.write_u8(T::WIDTH)?;
    w.write_u64::<LittleEndian>(match bank.capacity() {
        Capacity::Bounded(k) => k as u64,
        Capacity::Unbounded => 0,
    })?;
    w.write_u8(u8::from(bank.is_frozen()))?;
    w.write_u64::<LittleEndian>(bank.next_seq())?;
    w.write_u64::<LittleEndian>(bank.len() as u64)?;
    w.write_u64::<LittleEndian>(bank.feature_dim().unwrap_or(0) as u64)?;
    for e in bank.entries() {
        w.write_u64::<LittleEndian>(e.label as u64)?;
        w.write_u8(match e.kind {
            LabelKind::GroundTruth => 0,
            LabelKind::Pseudo => 1,
        })?;
        w.write_u8(u8::from(e.seed))?;
        w.write_u64::<LittleEndian>(e.inserted_at)?;
        w.write_i64::<LittleEndian>(opt_to_i64(e.source_index))?;
        w.write_i64::<LittleEndian>(opt_to_i64(e.condition))?;
        for &v in &e.features {
            v.write_le(w)?;
        }
    }
    Ok(())
}

pub fn read_bank<T: Real, R: Read>(r: &mut R) -> Result<MemoryBank<T>> {
    let bad = |m: &str| Error::Format {
        path: "<bank snapshot>".into(),
        message: m.to_string(),
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"OTMB" {
        return Err(bad("not a bank snapshot"));
    }
    if r.read_u32::<LittleEndian>()? != SNAPSHOT_VERSION {
        return Err(bad("unsupported snapshot version"));
    }
    if r.read_u8()? != T::WIDTH {
        return Err(bad("float width mismatch"));
    }
    let capacity = match r.read_u64::<LittleEndian>()? {
        0 => Capacity::Unbounded,
        k => Capacity::Bounded(k as usize),
    };
    let frozen = r.read_u8()? != 0;
    let next_seq = r.read_u64::<LittleEndian>()?;
    let count = r.read_u64::<LittleEndian>()? as usize;
    let dim = r.read_u64::<LittleEndian>()? as usize;
    let mut entries = VecDeque::with_capacity(count);
    for _ in 0..count {
        let label = r.read_u64::<LittleEndian>()? as usize;
        let kind = match r.read_u8()? {
            0 => LabelKind::GroundTruth,
            1 => LabelKind::Pseudo,
            _ => return Err(bad("unknown label kind")),
        };
        let seed = r.read_u8()? != 0;
        let inserted_at = r.read_u64::<LittleEndian>()?;
        let source_index = i64_to_opt(r.read_i64::<LittleEndian>()?);
        let condition = i64_to_opt(r.read_i64::<LittleEndian>()?);
        let features = (0..dim)
            .map(|_| T::read_le(r))
            .collect::<std::io::Result<Vec<T>>>()?;
        entries.push_back(BankEntry {
            features,
            label,
            kind,
            inserted_at,
            seed,
            source_index,
            condition,
        });
    }
    MemoryBank::from_parts(entries, capacity, frozen, next_seq)
}

impl<T: Real> MemoryBank<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_bank(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_bank(&mut BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{init_online_bank, LabelledSample};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn snapshot_roundtrip_exact(
            values in prop::collection::vec(-1e3f32..1e3, 1..40),
            k in 1usize..10,
            pushes in 0usize..25,
        ) {
            let off = MemoryBank::offline(
                values.iter().enumerate().map(|(i, &v)| LabelledSample {
                    features: vec![v, -v],
                    label: i % 4,
                    condition: Some(i % 2),
                    source_index: Some(i),
                }).collect(),
            ).unwrap();
            let mut on = init_online_bank(&off, k, k.min(values.len()) / 2, 3).unwrap();
            for p in 0..pushes {
                on.push_fifo(vec![p as f32, 0.5], p % 3, Some(p)).unwrap();
            }
            for bank in [&off, &on] {
                let mut buf = Vec::new();
                write_bank(bank, &mut buf).unwrap();
                let back: MemoryBank<f32> = read_bank(&mut buf.as_slice()).unwrap();
                prop_assert_eq!(&back, bank);
            }
        }
    }
}
