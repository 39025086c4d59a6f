use std::collections::{HashSet, VecDeque};

use otta_core::memory::{
    init_online_bank, joint_epoch_batches, resolve_joint, sample_joint_batch, JointIndex,
    LabelKind, LabelledSample, MemoryBank,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn offline_bank(n: usize) -> MemoryBank<f64> {
    MemoryBank::offline(
        (0..n)
            .map(|i| LabelledSample {
                features: vec![i as f64, -(i as f64)],
                label: i % 4,
                condition: Some(i % 2),
                source_index: Some(i),
            })
            .collect(),
    )
    .unwrap()
}

#[derive(Debug, Clone)]
enum Op {
    Push(u16, u8),
    Sample(u8),
    Epoch(u8),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (any::<u16>(), 0u8..4).prop_map(|(v, l)| Op::Push(v, l)),
        1 => (1u8..40).prop_map(Op::Sample),
        1 => (1u8..40).prop_map(Op::Epoch),
    ]
}

proptest! {
    #[test]
    fn online_bank_tracks_a_reference_queue(
        k in 1usize..24,
        n_off in 0usize..12,
        ops in proptest::collection::vec(op(), 1..200),
        seed in any::<u64>(),
    ) {
        let off = offline_bank(n_off);
        let off_before = off.clone();
        let mut on = MemoryBank::<f64>::online(k).unwrap();
        let mut oracle: VecDeque<(f64, usize)> = VecDeque::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for op in ops {
            match op {
                Op::Push(v, l) => {
                    let v = f64::from(v);
                    let evicted = on.push_fifo(vec![v, v], l as usize, None).unwrap();
                    oracle.push_back((v, l as usize));
                    let expected = if oracle.len() > k { oracle.pop_front() } else { None };
                    prop_assert_eq!(evicted.map(|e| (e.features[0], e.label)), expected);
                }
                Op::Sample(b) => {
                    if off.len() + on.len() == 0 {
                        prop_assert!(sample_joint_batch(&off, &on, b as usize, &mut rng).is_err());
                        continue;
                    }
                    let batch = sample_joint_batch(&off, &on, b as usize, &mut rng).unwrap();
                    prop_assert_eq!(batch.len(), b as usize);
                    let total = off.len() + on.len();
                    if (b as usize) <= total {
                        let distinct: HashSet<_> = batch.iter().map(|s| s.features.as_ptr()).collect();
                        prop_assert_eq!(distinct.len(), batch.len());
                    }
                }
                Op::Epoch(b) => {
                    if off.len() + on.len() == 0 {
                        continue;
                    }
                    let batches = joint_epoch_batches(&off, &on, b as usize, &mut rng).unwrap();
                    let mut seen: Vec<JointIndex> = batches.concat();
                    prop_assert!(batches.iter().all(|c| !c.is_empty() && c.len() <= b as usize));
                    prop_assert_eq!(seen.len(), off.len() + on.len());
                    seen.sort_by_key(|i| match *i {
                        JointIndex::Offline(j) => j,
                        JointIndex::Online(j) => off.len() + j,
                    });
                    for (pos, idx) in seen.into_iter().enumerate() {
                        let e = resolve_joint(&off, &on, idx);
                        if pos < off.len() {
                            prop_assert_eq!(e.kind, LabelKind::GroundTruth);
                        } else {
                            prop_assert_eq!(e.kind, LabelKind::Pseudo);
                        }
                    }
                }
            }
            prop_assert!(on.len() <= k);
            let contents: Vec<(f64, usize)> = on.entries().map(|e| (e.features[0], e.label)).collect();
            prop_assert_eq!(contents, oracle.iter().copied().collect::<Vec<_>>());
            let seqs: Vec<u64> = on.entries().map(|e| e.inserted_at).collect();
            prop_assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        }
        prop_assert_eq!(off, off_before);
    }

    #[test]
    fn seeding_copies_distinct_offline_entries(
        n_off in 1usize..60,
        k in 1usize..40,
        seed in any::<u64>(),
    ) {
        let off = offline_bank(n_off);
        let n_seed = k.min(n_off);
        let on = init_online_bank(&off, k, n_seed, seed).unwrap();
        prop_assert_eq!(on.len(), n_seed);
        let ids: HashSet<_> = on.entries().map(|e| e.source_index).collect();
        prop_assert_eq!(ids.len(), n_seed);
        for e in on.entries() {
            prop_assert!(e.seed);
            prop_assert_eq!(e.kind, LabelKind::GroundTruth);
            let src = off.get(e.source_index.unwrap()).unwrap();
            prop_assert_eq!(&e.features, &src.features);
            prop_assert_eq!(e.label, src.label);
        }
        prop_assert!(init_online_bank(&off, k, k + 1, seed).is_err());
    }
}

#[test]
fn offline_bank_rejects_writes() {
    let mut off = offline_bank(3);
    assert!(off.is_frozen());
    assert!(off.push_fifo(vec![0.0, 0.0], 0, None).is_err());
    assert_eq!(off, offline_bank(3));
}

#[test]
fn mismatched_feature_width_is_rejected() {
    let mut on = MemoryBank::<f64>::online(4).unwrap();
    on.push_fifo(vec![1.0, 2.0], 0, None).unwrap();
    assert!(on.push_fifo(vec![1.0], 0, None).is_err());
    assert_eq!(on.len(), 1);
}
