use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use otta_core::datagen::{
    generate_segment, write_csv, CsvSchema, DatasetManifest, ManifestRecord, RecordSplit,
};
use otta_core::harness::{
    self, artifacts_from_model, offline_mode, prepare_offline, run_trial_with, write_trial,
    DataSource, ExperimentConfig, TrialData,
};
use otta_core::offline::{load_checkpoint, save_checkpoint, TrainingMode};
use otta_core::online::Method;

#[derive(Parser)]
#[command(
    name = "otta",
    version,
    about = "Offline DANN training and replay-guided online adaptation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Adversarial,
    SourceOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Write a preset experiment config.
    InitConfig {
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a trial's synthetic recordings as CSV files plus a manifest.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Train the offline model of one trial and save a checkpoint.
    TrainOffline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, value_enum, default_value = "adversarial")]
        mode: Mode,
    },
    /// Stream one method over one trial.
    RunStream {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Start from this checkpoint instead of training offline.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run every method for every trial and write the summary.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Re-aggregate the trials stored under an ablation directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::InitConfig { preset, out } => {
            let c = match preset {
                Preset::Desk => ExperimentConfig::desk(),
                Preset::Full => ExperimentConfig::full_scale(),
            };
            c.save(&out)?;
            println!("wrote {}", out.display());
        }
        Command::GenData { config, out, trial } => gen_data(&load(&config)?, &out, trial)?,
        Command::TrainOffline {
            config,
            out,
            trial,
            mode,
        } => {
            let c = load(&config)?;
            let mode = match mode {
                Mode::Adversarial => TrainingMode::Adversarial,
                Mode::SourceOnly => TrainingMode::SourceOnly,
            };
            let a = prepare_offline::<f32>(&c, c.trial_seed(trial), mode)?;
            save_checkpoint(&out, &a.model, &a.standardizer, &c.config_hash())?;
            a.log.write_csv(&out.join("training.csv"))?;
            if let Some(last) = a.log.epochs.last() {
                println!(
                    "epoch {}: loss_f {:.4} loss_c {} train_acc {:.4}",
                    last.epoch,
                    last.loss_f,
                    last.loss_c
                        .map(|v| format!("{v:.4}"))
                        .unwrap_or_else(|| "-".into()),
                    last.train_acc
                );
            }
            println!("checkpoint written to {}", out.display());
        }
        Command::RunStream {
            config,
            method,
            out,
            trial,
            checkpoint,
        } => {
            let c = load(&config)?;
            let Some(method) = Method::parse(&method) else {
                bail!("unknown method {method:?}; expected one of baseline, without_update, without_replay, proposed");
            };
            let seed = c.trial_seed(trial);
            let mode = offline_mode(method);
            let artifacts = match checkpoint {
                Some(dir) => {
                    let (model, standardizer, _) = load_checkpoint::<f32>(&dir)
                        .with_context(|| format!("loading checkpoint {}", dir.display()))?;
                    artifacts_from_model(&c, seed, mode, model, standardizer)?
                }
                None => prepare_offline::<f32>(&c, seed, mode)?,
            };
            let result = run_trial_with(&c, method, seed, &artifacts)?;
            write_trial(&out, &result, &c.config_hash())?;
            for s in &result.result.segments {
                println!(
                    "segment {} condition {} ({}): accuracy {:.4} over {} events",
                    s.index, s.condition, s.tag, s.accuracy, s.events
                );
            }
            println!(
                "{} updates; logs in {}",
                result.result.update_count,
                out.display()
            );
        }
        Command::Ablate { config, output_dir } => {
            let mut c = load(&config)?;
            if let Some(d) = output_dir {
                c.output_dir = d;
            }
            let report = harness::run_ablation(&c)?;
            print!("{}", report.summary.to_table());
            println!(
                "ran {} trials, resumed {}; summary in {}",
                report.ran.len(),
                report.resumed.len(),
                c.output_dir.display()
            );
            if !report.summary.incomplete.is_empty() {
                bail!("{} trials failed", report.summary.incomplete.len());
            }
        }
        Command::Report { dir } => {
            let summary = harness::report(&dir)?;
            print!("{}", summary.to_table());
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))
}

/// Writes one offline recording per offline `(condition, fault)` and one
/// online recording per `(condition, class)` the stream uses.
fn gen_data(c: &ExperimentConfig, out: &Path, trial: usize) -> Result<()> {
    let TrialData::Synthetic(spec) = TrialData::new(c, c.trial_seed(trial))? else {
        bail!("gen-data needs a synthetic data source");
    };
    if !matches!(c.data, DataSource::Synthetic(_)) {
        bail!("gen-data needs a synthetic data source");
    }
    std::fs::create_dir_all(out)?;
    let names: Vec<String> = (0..spec.n_channels).map(|i| format!("ch{i}")).collect();
    let offline_len = c.window + (c.offline_windows_per_cell - 1) * c.step;
    let mut records = Vec::new();

    for &cond in &c.offline_conditions {
        for fault in 0..spec.n_faults {
            let rec = generate_segment(&spec, cond, fault, offline_len, 0, 0)?;
            let path = PathBuf::from(format!("c{cond}_f{fault}_offline.csv"));
            write_csv(&rec, &names, &out.join(&path))?;
            records.push(ManifestRecord {
                path,
                condition: cond,
                fault,
                split: RecordSplit::Offline,
            });
        }
    }

    // windows needed per (condition, class) across the stream
    let mut needed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for s in &c.online_sequence {
        let h = s.injection_index();
        for (class, n) in [(c.healthy_label, h), (s.fault_label, s.length - h)] {
            if n > 0 {
                let e = needed.entry((s.condition, class)).or_default();
                *e = (*e).max(n);
            }
        }
    }
    for (i, (&(cond, class), &n)) in needed.iter().enumerate() {
        let len = c.window + (n - 1) * c.step;
        let rec = generate_segment(&spec, cond, class, len, offline_len, 1000 + i as u64)?;
        let path = PathBuf::from(format!("c{cond}_f{class}_online.csv"));
        write_csv(&rec, &names, &out.join(&path))?;
        records.push(ManifestRecord {
            path,
            condition: cond,
            fault: class,
            split: RecordSplit::Online,
        });
    }

    let manifest = DatasetManifest {
        n_conditions: spec.n_conditions,
        n_faults: spec.n_faults,
        csv: CsvSchema {
            channels: names,
            sample_rate_hz: spec.sample_rate_hz,
        },
        records,
        base_dir: PathBuf::new(),
    };
    manifest.save(&out.join("manifest.toml"))?;
    println!(
        "wrote {} recordings and manifest.toml to {}",
        manifest.records.len(),
        out.display()
    );
    Ok(())
}
