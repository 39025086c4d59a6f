mod common;

use common::tiny_config;
use otta_core::harness::{offline_dataset, prepare_offline, ExperimentConfig};
use otta_core::offline::{accuracy, load_checkpoint, save_checkpoint, train_offline, TrainingMode};

fn trained(
    c: &ExperimentConfig,
    mode: TrainingMode,
) -> (f64, otta_core::offline::TrainingLog, String) {
    let mut cfg = c.offline.clone();
    cfg.mode = mode;
    let (ds, _) = offline_dataset::<f32>(c, 11, None).unwrap();
    let arch = c.model.arch(ds.x.ncols());
    let (model, log) = train_offline(&ds, &arch, &cfg, 11).unwrap();
    (
        accuracy(&model, &ds.x, &ds.faults).unwrap(),
        log,
        model.param_digest(),
    )
}

#[test]
fn both_modes_fit_the_offline_conditions() {
    let c = ExperimentConfig::desk();
    for mode in [TrainingMode::Adversarial, TrainingMode::SourceOnly] {
        let (acc, log, _) = trained(&c, mode);
        assert!(acc >= 0.99, "{mode:?} train accuracy {acc}");
        let first = log.epochs.first().unwrap().loss_f;
        let last = log.epochs.last().unwrap().loss_f;
        assert!(last < first, "{mode:?} loss {first} -> {last}");
        match mode {
            TrainingMode::Adversarial => {
                assert!(log.epochs.iter().all(|e| e.loss_c.is_some()));
                assert!(log.reversal_steps > 0);
            }
            TrainingMode::SourceOnly => {
                assert!(log.epochs.iter().all(|e| e.loss_c.is_none()));
                assert_eq!(log.reversal_steps, 0);
            }
        }
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny_config(dir.path());
    let a = trained(&c, TrainingMode::Adversarial);
    let b = trained(&c, TrainingMode::Adversarial);
    assert_eq!(a.2, b.2);
    assert_eq!(a.1, b.1);
}

#[test]
fn lambda_follows_the_schedule_from_zero() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny_config(dir.path());
    let (_, log, _) = trained(&c, TrainingMode::Adversarial);
    let lambdas: Vec<f64> = log.epochs.iter().map(|e| e.lambda).collect();
    assert!(lambdas.windows(2).all(|w| w[0] <= w[1]));
    assert!(lambdas.iter().all(|l| (0.0..=1.0).contains(l)));
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny_config(dir.path());
    let a = prepare_offline::<f32>(&c, 5, TrainingMode::Adversarial).unwrap();
    let ckpt = dir.path().join("ckpt");
    save_checkpoint(&ckpt, &a.model, &a.standardizer, &c.config_hash()).unwrap();
    let (model, std, manifest) = load_checkpoint::<f32>(&ckpt).unwrap();
    assert_eq!(model.param_digest(), a.model.param_digest());
    assert_eq!(manifest.param_digest, a.model.param_digest());
    assert_eq!(manifest.config_hash, c.config_hash());
    let (ds, _) = offline_dataset::<f32>(&c, 5, Some(std)).unwrap();
    assert_eq!(
        model.fault_logits(&ds.x).unwrap(),
        a.model.fault_logits(&ds.x).unwrap()
    );
}
