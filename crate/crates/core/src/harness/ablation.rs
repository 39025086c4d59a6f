use std::path::{Path, PathBuf};

use super::aggregate::{aggregate, IncompleteCell, Summary};
use super::config::ExperimentConfig;
use super::trial::{
    offline_mode, prepare_offline, run_trial_with, write_curve_csv, write_events_csv,
    write_updates_csv, OfflineArtifacts, TrialOutput, TrialResult,
};
use crate::error::{Error, Result};
use crate::offline::{save_checkpoint, TrainingMode};
use crate::online::Method;

const DONE_MARKER: &str = "DONE";
const RESULT_FILE: &str = "result.json";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TEXT: &str = "summary.txt";
pub const CONFIG_COPY: &str = "config.toml";

pub fn trial_dir(output_dir: &Path, method: Method, seed: u64) -> PathBuf {
    output_dir
        .join("trials")
        .join(method.name())
        .join(format!("seed_{seed}"))
}

fn mode_name(mode: TrainingMode) -> &'static str {
    match mode {
        TrainingMode::Adversarial => "adversarial",
        TrainingMode::SourceOnly => "source_only",
    }
}

/// What a completed [`run_ablation`] did.
#[derive(Debug, Clone)]
pub struct AblationReport {
    pub summary: Summary,
    /// Trials executed by this call.
    pub ran: Vec<(Method, u64)>,
    /// Trials skipped because their completion marker was present.
    pub resumed: Vec<(Method, u64)>,
}

/// Writes a trial's logs and result, then its completion marker.
pub fn write_trial(dir: &Path, out: &TrialOutput, config_hash: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_events_csv(&dir.join("events.csv"), &out.events)?;
    write_updates_csv(&dir.join("updates.csv"), &out.updates)?;
    write_curve_csv(&dir.join("curve.csv"), &out.result.curve)?;
    std::fs::write(
        dir.join(RESULT_FILE),
        serde_json::to_string_pretty(&out.result)?,
    )?;
    // marker last: its presence means everything above is on disk
    std::fs::write(dir.join(DONE_MARKER), config_hash)?;
    Ok(())
}

/// The stored result if the trial completed under the same config.
fn completed(dir: &Path, config_hash: &str) -> Result<Option<TrialResult>> {
    let marker = dir.join(DONE_MARKER);
    if !marker.exists() {
        return Ok(None);
    }
    let stored = std::fs::read_to_string(&marker)?;
    if stored.trim() != config_hash {
        return Err(Error::config(format!(
            "{} holds results of a different config; use a fresh output_dir",
            dir.display()
        )));
    }
    let text = std::fs::read_to_string(dir.join(RESULT_FILE))?;
    Ok(Some(serde_json::from_str(&text)?))
}

/// Runs every configured method for every trial seed, skipping trials that
/// already completed, and writes the summary.
pub fn run_ablation(config: &ExperimentConfig) -> Result<AblationReport> {
    config.validate()?;
    let out_dir = &config.output_dir;
    let hash = config.config_hash();
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(CONFIG_COPY), config.to_toml()?)?;

    let mut results = Vec::new();
    let mut incomplete = Vec::new();
    let mut ran = Vec::new();
    let mut resumed = Vec::new();
    for i in 0..config.trials {
        let seed = config.trial_seed(i);
        let mut cache: Vec<OfflineArtifacts<f32>> = Vec::new();
        for &method in &config.methods {
            let dir = trial_dir(out_dir, method, seed);
            if let Some(r) = completed(&dir, &hash)? {
                log::info!("{method} seed {seed}: already complete");
                results.push(r);
                resumed.push((method, seed));
                continue;
            }
            let mode = offline_mode(method);
            let outcome = (|| -> Result<TrialResult> {
                if !cache.iter().any(|a| a.mode == mode) {
                    log::info!("seed {seed}: offline training ({})", mode_name(mode));
                    let a = prepare_offline::<f32>(config, seed, mode)?;
                    let odir = out_dir
                        .join("offline")
                        .join(format!("seed_{seed}"))
                        .join(mode_name(mode));
                    save_checkpoint(&odir, &a.model, &a.standardizer, &hash)?;
                    a.log.write_csv(&odir.join("training.csv"))?;
                    cache.push(a);
                }
                let artifacts = cache.iter().find(|a| a.mode == mode).expect("cached above");
                log::info!("{method} seed {seed}: streaming");
                let out = run_trial_with(config, method, seed, artifacts)?;
                write_trial(&dir, &out, &hash)?;
                Ok(out.result)
            })();
            match outcome {
                Ok(r) => {
                    results.push(r);
                    ran.push((method, seed));
                }
                Err(e) => {
                    log::error!("{method} seed {seed} failed: {e}");
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("error.txt"), e.to_string())?;
                    incomplete.push(IncompleteCell {
                        method,
                        seed,
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    let summary = write_summary(config, &results, incomplete)?;
    Ok(AblationReport {
        summary,
        ran,
        resumed,
    })
}

fn write_summary(
    config: &ExperimentConfig,
    results: &[TrialResult],
    incomplete: Vec<IncompleteCell>,
) -> Result<Summary> {
    let mut summary = aggregate(results, &config.offline_conditions, &config.config_hash())?;
    summary.incomplete = incomplete;
    std::fs::write(config.output_dir.join(SUMMARY_JSON), summary.to_json()?)?;
    std::fs::write(config.output_dir.join(SUMMARY_TEXT), summary.to_table())?;
    Ok(summary)
}

/// Re-aggregates the completed trials under `output_dir` using the config
/// copy stored there. Trials without a completion marker are listed as
/// incomplete.
pub fn report(output_dir: &Path) -> Result<Summary> {
    let mut config = ExperimentConfig::load(&output_dir.join(CONFIG_COPY))?;
    config.output_dir = output_dir.to_path_buf();
    let hash = config.config_hash();
    let mut results = Vec::new();
    let mut incomplete = Vec::new();
    for i in 0..config.trials {
        let seed = config.trial_seed(i);
        for &method in &config.methods {
            let dir = trial_dir(output_dir, method, seed);
            match completed(&dir, &hash)? {
                Some(r) => results.push(r),
                None => {
                    let error = std::fs::read_to_string(dir.join("error.txt"))
                        .unwrap_or_else(|_| "not run".into());
                    incomplete.push(IncompleteCell {
                        method,
                        seed,
                        error,
                    });
                }
            }
        }
    }
    write_summary(&config, &results, incomplete)
}
