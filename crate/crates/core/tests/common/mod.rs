#![allow(dead_code)]

use std::path::Path;

use otta_core::harness::{BankConfig, ExperimentConfig, ModelConfig};

/// A config small enough to stream every method in about a second.
pub fn tiny_config(output_dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::desk();
    c.trials = 2;
    c.output_dir = output_dir.to_path_buf();
    c.window = 32;
    c.step = 16;
    c.offline_windows_per_cell = 40;
    for s in &mut c.online_sequence {
        s.length = 60;
    }
    c.model = ModelConfig {
        feature_hidden: vec![16],
        feature_dim: 8,
        classifier_hidden: vec![8],
        discriminator_hidden: vec![8],
    };
    c.offline.epochs = 3;
    c.offline.batch_size = 32;
    c.bank = BankConfig {
        per_cell: 10,
        online_capacity: 64,
        n_seed: Some(16),
    };
    c.otta.update_epochs = 2;
    c.otta.replay_batch_size = 16;
    c.otta.stream_batch_size = 16;
    c.otta.conf_threshold = 0.5;
    c
}

/// Running and per-segment accuracy recomputed from scratch.
pub fn recompute_curve(correct: &[bool], bounds: &[(usize, usize)]) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for &(start, end) in bounds {
        for t in start..end {
            let total = correct[..=t].iter().filter(|&&c| c).count();
            let seg = correct[start..=t].iter().filter(|&&c| c).count();
            out.push((
                t + 1,
                total as f64 / (t + 1) as f64,
                seg as f64 / (t + 1 - start) as f64,
            ));
        }
    }
    out
}
