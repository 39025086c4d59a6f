//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::VecDeque;
use std::time::Instant;

use common::{recompute_curve, tiny_config};
use ndarray::Array2;
use otta_core::datagen::{window_count, window_record, SignalRecord};
use otta_core::harness::{
    mean_sd, read_curve_csv, read_events_csv, run_ablation, segment_bounds, trial_dir,
    ConditionTag, ExperimentConfig, TrialResult, SUMMARY_JSON,
};
use otta_core::memory::{joint_epoch_batches, sample_joint_batch, LabelledSample, MemoryBank};
use otta_core::nncore::{grad_reverse, softmax_cross_entropy, MlpNetwork};
use otta_core::offline::{load_checkpoint, ArchConfig, DannBatch, DannModel, Seam};
use otta_core::online::{Method, OttaConfig, OttaEngine};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn toy_model(seed: u64) -> DannModel<f64> {
    let arch = ArchConfig {
        input_dim: 6,
        feature_hidden: vec![12],
        feature_dim: 8,
        classifier_hidden: vec![7],
        discriminator_hidden: vec![6],
    };
    DannModel::new(&arch, 3, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> (Array2<f64>, Vec<usize>, Vec<usize>) {
    let x = Array2::from_shape_fn((n, 6), |_| rng.random_range(-1.5..1.5));
    let f = (0..n).map(|_| rng.random_range(0..3)).collect();
    let c = (0..n).map(|_| rng.random_range(0..2)).collect();
    (x, f, c)
}

/// Per-sample `-ln softmax(row)[target]`, summed and divided by the batch size.
fn direct_nll(logits: &Array2<f64>, targets: &[usize]) -> f64 {
    let mut sum = 0.0;
    for (row, &t) in logits.rows().into_iter().zip(targets) {
        let z: f64 = row.iter().map(|v| v.exp()).sum();
        sum += -(row[t].exp() / z).ln();
    }
    sum / targets.len() as f64
}

fn dann_losses(m: &DannModel<f64>, x: &Array2<f64>, f: &[usize], c: &[usize]) -> (f64, f64) {
    let h = m.feature.infer(x).unwrap();
    (
        direct_nll(&m.fault_head.infer(&h).unwrap(), f),
        direct_nll(&m.condition_head.infer(&h).unwrap(), c),
    )
}

fn fd_part(
    m: &DannModel<f64>,
    pick: fn(&mut DannModel<f64>) -> &mut MlpNetwork<f64>,
    obj: &dyn Fn(&DannModel<f64>) -> f64,
) -> Vec<f64> {
    const H: f64 = 1e-5;
    let mut m = m.clone();
    let base = pick(&mut m).flat_params();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + H;
            pick(&mut m).set_flat_params(&p).unwrap();
            let up = obj(&m);
            p[i] = base[i] - H;
            pick(&mut m).set_flat_params(&p).unwrap();
            (up - obj(&m)) / (2.0 * H)
        })
        .collect()
}

fn gradient_check() -> Check {
    let start = Instant::now();
    let model = toy_model(17);
    let (x, f, c) = random_batch(&mut ChaCha8Rng::seed_from_u64(18), 6);
    let mut worst = 0.0f64;
    let mut count = 0;
    for lambda in [0.0, 0.5, 1.0] {
        let g = model
            .gradients(
                DannBatch {
                    x: &x,
                    faults: &f,
                    conditions: &c,
                },
                Seam::Reverse(lambda),
            )
            .map_err(|e| e.to_string())?;
        let composite = |m: &DannModel<f64>| {
            let (lf, lc) = dann_losses(m, &x, &f, &c);
            lf - lambda * lc
        };
        let cond = |m: &DannModel<f64>| dann_losses(m, &x, &f, &c).1;
        let pairs = [
            (
                g.feature.flatten(),
                fd_part(&model, |m| &mut m.feature, &composite),
            ),
            (
                g.fault_head.flatten(),
                fd_part(&model, |m| &mut m.fault_head, &composite),
            ),
            (
                g.condition_head
                    .as_ref()
                    .ok_or("no discriminator gradient")?
                    .flatten(),
                fd_part(&model, |m| &mut m.condition_head, &cond),
            ),
        ];
        for (analytic, numeric) in pairs {
            for (a, n) in analytic.iter().zip(&numeric) {
                worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
                count += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst < 1e-4, format!("max rel err {worst:.2e}"))?;
    ensure(secs < 10.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "{count} parameter gradients, max rel err {worst:.2e}, {secs:.2}s"
    ))
}

fn reversal_law() -> Check {
    let model = toy_model(5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (x, f, c) = random_batch(&mut rng, 8);
    let b = DannBatch {
        x: &x,
        faults: &f,
        conditions: &c,
    };
    let plain = model
        .gradients(b, Seam::Passthrough)
        .map_err(|e| e.to_string())?;
    let raw = plain.dh_condition.ok_or("no condition gradient")?;
    for _ in 0..100 {
        let lambda: f64 = rng.random_range(0.0..=1.0);
        let rev = model
            .gradients(b, Seam::Reverse(lambda))
            .map_err(|e| e.to_string())?;
        let dh = rev.dh_condition.ok_or("no condition gradient")?;
        ensure(
            dh == raw.mapv(|d| -lambda * d),
            format!("seam mismatch at lambda {lambda}"),
        )?;
        ensure(
            dh == grad_reverse(&raw, lambda).unwrap(),
            "grad_reverse disagrees",
        )?;
    }
    Ok("100 random lambdas, bitwise equal to -lambda x unreversed".into())
}

fn loss_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (b, k) = (rng.random_range(1..20), rng.random_range(2..8));
        let logits = Array2::from_shape_fn((b, k), |_| rng.random_range(-6.0..6.0));
        let targets: Vec<usize> = (0..b).map(|_| rng.random_range(0..k)).collect();
        let (loss, _) = softmax_cross_entropy(&logits, &targets).map_err(|e| e.to_string())?;
        worst = worst.max((loss - direct_nll(&logits, &targets)).abs());
    }
    // fault and condition losses of the adversarial model
    for seed in 0..10 {
        let model = toy_model(seed);
        let (x, f, c) = random_batch(&mut rng, 9);
        let g = model
            .gradients(
                DannBatch {
                    x: &x,
                    faults: &f,
                    conditions: &c,
                },
                Seam::Reverse(0.5),
            )
            .map_err(|e| e.to_string())?;
        let (lf, lc) = dann_losses(&model, &x, &f, &c);
        worst = worst
            .max((g.loss_f - lf).abs())
            .max((g.loss_c.unwrap() - lc).abs());
    }
    // replay loss over the joint bank
    for seed in 0..10 {
        let model = toy_model(100 + seed);
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let offline = MemoryBank::offline(
            (0..12)
                .map(|i| LabelledSample {
                    features: sample(&mut rng),
                    label: i % 3,
                    condition: Some(i % 2),
                    source_index: Some(i),
                })
                .collect(),
        )
        .unwrap();
        let mut online = MemoryBank::online(8).unwrap();
        for i in 0..11 {
            online.push_fifo(sample(&mut rng), i % 3, None).unwrap();
        }
        let rows: Vec<(Vec<f64>, usize)> = offline
            .entries()
            .chain(online.entries())
            .map(|e| (e.features.clone(), e.label))
            .collect();
        let x = Array2::from_shape_fn((rows.len(), 6), |(i, j)| rows[i].0[j]);
        let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let expected = direct_nll(&model.fault_logits(&x).unwrap(), &labels);
        let engine = OttaEngine::new(model, offline, online, OttaConfig::default(), seed, None)
            .map_err(|e| e.to_string())?;
        worst = worst.max((engine.replay_loss().map_err(|e| e.to_string())? - expected).abs());
    }
    ensure(worst < 1e-6, format!("max abs err {worst:.2e}"))?;
    Ok(format!(
        "fault, condition and replay losses, max abs err {worst:.2e}"
    ))
}

fn bank_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let offline = MemoryBank::offline(
        (0..50)
            .map(|i| LabelledSample {
                features: vec![i as f64],
                label: i % 4,
                condition: Some(i % 2),
                source_index: Some(i),
            })
            .collect(),
    )
    .unwrap();
    let frozen = offline.clone();
    let k = 64;
    let mut online = MemoryBank::<f64>::online(k).unwrap();
    let mut oracle: VecDeque<u64> = VecDeque::new();
    let (mut pushes, mut evictions, mut draws) = (0, 0, 0);
    let mut off_copy = offline.clone();
    for n in 0..10_000u64 {
        match rng.random_range(0..10) {
            0..=5 => {
                let evicted = online
                    .push_fifo(vec![n as f64], (n % 4) as usize, None)
                    .unwrap();
                oracle.push_back(n);
                let expected = (oracle.len() > k).then(|| oracle.pop_front().unwrap());
                ensure(
                    evicted.as_ref().map(|e| e.features[0] as u64) == expected,
                    format!("op {n}: wrong eviction"),
                )?;
                pushes += 1;
                evictions += usize::from(expected.is_some());
            }
            6..=7 => {
                let b = rng.random_range(1..200);
                let batch = sample_joint_batch(&offline, &online, b, &mut rng).unwrap();
                ensure(batch.len() == b, "batch size")?;
                draws += 1;
            }
            8 => {
                let b = rng.random_range(1..64);
                let n_items: usize = joint_epoch_batches(&offline, &online, b, &mut rng)
                    .unwrap()
                    .iter()
                    .map(Vec::len)
                    .sum();
                ensure(
                    n_items == offline.len() + online.len(),
                    "epoch does not cover the union",
                )?;
                draws += 1;
            }
            _ => {
                ensure(
                    off_copy.push_fifo(vec![0.0], 0, None).is_err(),
                    "offline bank accepted a push",
                )?;
            }
        }
        ensure(online.len() <= k, format!("op {n}: capacity exceeded"))?;
        ensure(
            online
                .entries()
                .map(|e| e.features[0] as u64)
                .eq(oracle.iter().copied()),
            format!("op {n}: FIFO order diverged"),
        )?;
    }
    ensure(
        offline == frozen && off_copy == frozen,
        "offline bank changed",
    )?;
    Ok(format!(
        "10000 ops: {pushes} pushes, {evictions} evictions, {draws} draws"
    ))
}

fn window_counts() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..1000 {
        let window = rng.random_range(1..64);
        let step = rng.random_range(1..32);
        let t = rng.random_range(window..window + 400);
        let expected = (t - window) / step + 1;
        ensure(
            window_count(t, window, step) == expected,
            format!("count ({t},{window},{step})"),
        )?;
        let rec = SignalRecord::new(Array2::zeros((2, t)), 0, 0, 1.0).map_err(|e| e.to_string())?;
        let emitted = window_record(&rec, window, step).map_err(|e| e.to_string())?;
        ensure(
            emitted.len() == expected,
            format!("emitted ({t},{window},{step})"),
        )?;
        ensure(
            emitted.iter().all(|w| w.features.len() == 2 * window),
            "flattened width",
        )?;
    }
    let full = ExperimentConfig::full_scale();
    let dim = full.input_dim().map_err(|e| e.to_string())?;
    ensure(dim == 6144, format!("full-scale input width {dim}"))?;
    Ok("1000 random triples; full-scale input 6 x 1024 = 6144".into())
}

fn load_result(dir: &std::path::Path, method: Method, seed: u64) -> TrialResult {
    let text = std::fs::read_to_string(trial_dir(dir, method, seed).join("result.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn ablation_ordering(c: &ExperimentConfig) -> Check {
    let start = Instant::now();
    let report = run_ablation(c).map_err(|e| e.to_string())?;
    ensure(report.summary.incomplete.is_empty(), "some trials failed")?;
    let tag = |m, t| {
        report
            .summary
            .tag(m, t)
            .map(|s| s.mean)
            .ok_or("missing cell")
    };
    let uc = |m| tag(m, ConditionTag::Unknown);
    let kc = |m| tag(m, ConditionTag::Known);
    let d_update = uc(Method::Proposed)? - uc(Method::WithoutUpdate)?;
    let d_base = uc(Method::Proposed)? - uc(Method::Baseline)?;
    let d_replay = kc(Method::Proposed)? - kc(Method::WithoutReplay)?;
    let line = format!(
        "UC proposed {:.3} vs without_update {:+.3}, vs baseline {:+.3}; KC proposed {:.3} vs without_replay {:+.3}; {} seeds, {:.0}s",
        uc(Method::Proposed)?,
        d_update,
        d_base,
        kc(Method::Proposed)?,
        d_replay,
        c.trials,
        start.elapsed().as_secs_f64()
    );
    ensure(
        d_update >= 0.05 && d_base >= 0.05 && d_replay >= 0.05,
        line.clone(),
    )?;
    Ok(line)
}

fn frozen_hash(c: &ExperimentConfig) -> Check {
    for i in 0..c.trials {
        let seed = c.trial_seed(i);
        let r = load_result(&c.output_dir, Method::WithoutUpdate, seed);
        let ckpt = c
            .output_dir
            .join("offline")
            .join(format!("seed_{seed}"))
            .join("adversarial");
        let (_, _, manifest) = load_checkpoint::<f32>(&ckpt).map_err(|e| e.to_string())?;
        ensure(r.update_count == 0, "frozen model ran updates")?;
        ensure(
            r.final_digest == manifest.param_digest && r.initial_digest == manifest.param_digest,
            format!("seed {seed}: digest changed"),
        )?;
    }
    Ok(format!("{} trials end on the checkpoint digest", c.trials))
}

fn curve_integrity(c: &ExperimentConfig) -> Check {
    let bounds = segment_bounds(c);
    let mut points = 0;
    for i in 0..c.trials {
        for method in Method::ALL {
            let dir = trial_dir(&c.output_dir, method, c.trial_seed(i));
            let events = read_events_csv(&dir.join("events.csv")).map_err(|e| e.to_string())?;
            let curve = read_curve_csv(&dir.join("curve.csv")).map_err(|e| e.to_string())?;
            let correct: Vec<bool> = events
                .iter()
                .map(|e| e.pseudo_label == e.hidden_label)
                .collect();
            let expected = recompute_curve(&correct, &bounds);
            ensure(curve.len() == expected.len(), "curve length")?;
            for (p, (t, run, seg)) in curve.iter().zip(expected) {
                ensure(
                    p.t == t
                        && p.running_acc.to_bits() == run.to_bits()
                        && p.segment_acc.to_bits() == seg.to_bits(),
                    format!("{method} seed {}: t={t} differs", c.trial_seed(i)),
                )?;
            }
            points += curve.len();
        }
    }
    Ok(format!("{points} curve points reproduced bit-exactly"))
}

fn determinism() -> Check {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs = Vec::new();
    for d in &dirs {
        run_ablation(&tiny_config(d.path())).map_err(|e| e.to_string())?;
        outputs.push(std::fs::read(d.path().join(SUMMARY_JSON)).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], "summary JSON differs")?;
    Ok(format!(
        "two ablations, identical {}-byte summaries",
        outputs[0].len()
    ))
}

fn statistics() -> Check {
    let (m, s) = mean_sd(&[0.9, 1.0]).map_err(|e| e.to_string())?;
    ensure(
        (m - 0.95).abs() < 5e-5 && (s - 0.0707).abs() < 5e-5,
        format!("{m:.4} ± {s:.4}"),
    )?;
    // 0.8, 0.9, 1.0: mean 0.9, sd sqrt((0.01 + 0 + 0.01) / 2) = 0.1
    let (m3, s3) = mean_sd(&[0.8, 0.9, 1.0]).map_err(|e| e.to_string())?;
    ensure(
        (m3 - 0.9).abs() < 5e-5 && (s3 - 0.1).abs() < 5e-5,
        format!("{m3:.4} ± {s3:.4}"),
    )?;
    Ok(format!(
        "{{0.9, 1.0}} -> {m:.4} ± {s:.4}; {{0.8, 0.9, 1.0}} -> {m3:.4} ± {s3:.4}"
    ))
}

fn main() {
    let ablation_dir = tempfile::tempdir().unwrap();
    let mut desk = ExperimentConfig::desk();
    desk.output_dir = ablation_dir.path().to_path_buf();

    let criteria: Vec<Criterion> = vec![
        ("gradient check", Box::new(gradient_check)),
        ("reversal law", Box::new(reversal_law)),
        ("loss oracles", Box::new(loss_oracles)),
        ("bank invariants", Box::new(bank_invariants)),
        ("window count", Box::new(window_counts)),
        ("ablation ordering", Box::new(|| ablation_ordering(&desk))),
        ("frozen model hash", Box::new(|| frozen_hash(&desk))),
        ("prequential integrity", Box::new(|| curve_integrity(&desk))),
        ("determinism", Box::new(determinism)),
        ("statistics", Box::new(statistics)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
