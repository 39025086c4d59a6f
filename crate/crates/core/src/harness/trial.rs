use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ConditionTag, ExperimentConfig};
use super::stream::{build_segment, offline_windows, TrialData};
use crate::datagen::Standardizer;
use crate::error::{Error, Result};
use crate::memory::{init_online_bank, MemoryBank};
use crate::nncore::Real;
use crate::offline::{
    init_model, init_offline_bank, train_model_with_state, DannModel, DannOptimizers, OfflineBank,
    OfflineDataset, TrainingLog, TrainingMode,
};
use crate::online::{Method, OttaEngine, UpdateReport};

/// Offline training mode a method starts from.
pub fn offline_mode(method: Method) -> TrainingMode {
    match method {
        Method::Baseline => TrainingMode::SourceOnly,
        _ => TrainingMode::Adversarial,
    }
}

/// Everything the offline stage hands to the online stage.
#[derive(Debug, Clone)]
pub struct OfflineArtifacts<T: Real> {
    pub mode: TrainingMode,
    pub model: DannModel<T>,
    pub optimizers: DannOptimizers<T>,
    pub standardizer: Standardizer,
    pub log: TrainingLog,
    pub bank: OfflineBank<T>,
}

/// Builds the offline set of trial `trial_seed`, fits the standardizer,
/// trains in `mode` and draws the offline bank.
pub fn prepare_offline<T: Real>(
    config: &ExperimentConfig,
    trial_seed: u64,
    mode: TrainingMode,
) -> Result<OfflineArtifacts<T>> {
    let (dataset, standardizer) = offline_dataset(config, trial_seed, None)?;
    let (_, n_faults, _) = config.data_shape()?;
    let arch = config.model.arch(dataset.x.ncols());
    let mut model = init_model(&arch, n_faults, dataset.n_conditions, trial_seed)?;
    let mut offline = config.offline.clone();
    offline.mode = mode;
    let (log, optimizers) = train_model_with_state(&mut model, &dataset, &offline, trial_seed)?;
    let bank = init_offline_bank(&dataset, config.bank.per_cell, trial_seed)?;
    Ok(OfflineArtifacts {
        mode,
        model,
        optimizers,
        standardizer,
        log,
        bank,
    })
}

/// Artifacts around an already trained model (e.g. a loaded checkpoint).
/// The offline bank is redrawn from the trial's offline set under the
/// model's standardizer; optimizer moments start at zero.
pub fn artifacts_from_model<T: Real>(
    config: &ExperimentConfig,
    trial_seed: u64,
    mode: TrainingMode,
    model: DannModel<T>,
    standardizer: Standardizer,
) -> Result<OfflineArtifacts<T>> {
    let (dataset, standardizer) = offline_dataset(config, trial_seed, Some(standardizer))?;
    if model.input_dim() != dataset.x.ncols() || model.n_faults() != dataset.n_faults {
        return Err(Error::shape(
            "checkpoint vs config",
            format!("{} inputs, {} faults", dataset.x.ncols(), dataset.n_faults),
            format!("{} inputs, {} faults", model.input_dim(), model.n_faults()),
        ));
    }
    let bank = init_offline_bank(&dataset, config.bank.per_cell, trial_seed)?;
    Ok(OfflineArtifacts {
        mode,
        optimizers: DannOptimizers::new(&model, config.offline.optimizer)?,
        model,
        standardizer,
        log: TrainingLog::default(),
        bank,
    })
}

/// Standardized offline set of a trial; fits the standardizer unless one is given.
pub fn offline_dataset<T: Real>(
    config: &ExperimentConfig,
    trial_seed: u64,
    standardizer: Option<Standardizer>,
) -> Result<(OfflineDataset<T>, Standardizer)> {
    config.validate()?;
    let data = TrialData::new(config, trial_seed)?;
    let windows = offline_windows(config, &data)?;
    let standardizer = match standardizer {
        Some(s) => s,
        None if config.standardize => {
            Standardizer::fit(windows.iter().map(|w| w.features.as_slice()))?
        }
        None => Standardizer::identity(config.input_dim()?),
    };
    let (_, n_faults, _) = config.data_shape()?;
    let domains = &config.offline_conditions;
    let dataset = OfflineDataset::<T>::from_windows(
        &windows,
        &standardizer,
        |c| domains.iter().position(|&d| d == c),
        n_faults,
        domains.len(),
    )?;
    Ok((dataset, standardizer))
}

/// One row of the per-event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: usize,
    pub condition_id: usize,
    pub hidden_label: usize,
    pub pseudo_label: usize,
    pub confidence: f64,
    pub accepted: bool,
    pub correct: bool,
}

/// Running accuracy after `t` events (`t` counts from 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub condition_id: usize,
    pub running_acc: f64,
    /// Running accuracy restarted at each segment boundary.
    pub segment_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResult {
    pub index: usize,
    pub condition: usize,
    pub tag: ConditionTag,
    pub events: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: Method,
    pub seed: u64,
    /// Prequential accuracy over every event of each condition.
    pub per_condition_accuracy: BTreeMap<usize, f64>,
    pub segments: Vec<SegmentResult>,
    pub update_count: usize,
    pub initial_digest: String,
    pub final_digest: String,
    #[serde(skip)]
    pub curve: Vec<CurvePoint>,
}

/// Trial result plus its logs.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub result: TrialResult,
    pub events: Vec<EventRecord>,
    pub updates: Vec<UpdateReport>,
}

/// Streams one trial through an engine started from `artifacts`.
pub fn run_trial_with<T: Real>(
    config: &ExperimentConfig,
    method: Method,
    trial_seed: u64,
    artifacts: &OfflineArtifacts<T>,
) -> Result<TrialOutput> {
    if artifacts.mode != offline_mode(method) {
        return Err(Error::contract(format!(
            "method {method} needs a {:?} model, got {:?}",
            offline_mode(method),
            artifacts.mode
        )));
    }
    let data = TrialData::new(config, trial_seed)?;
    let capacity = config.bank.online_capacity;
    let online = if method.adapts() {
        init_online_bank(
            &artifacts.bank.bank,
            capacity,
            config.bank.seed_count(),
            trial_seed,
        )?
    } else {
        MemoryBank::online(capacity)?
    };
    let mut otta = config.otta.clone();
    otta.method = method;
    let mut engine = OttaEngine::new(
        artifacts.model.clone(),
        artifacts.bank.bank.clone(),
        online,
        otta,
        trial_seed,
        Some(&artifacts.optimizers),
    )?;
    let initial_digest = engine.model().param_digest();

    let mut events = Vec::new();
    for index in 0..config.online_sequence.len() {
        if index > 0 && config.reset_at_boundary {
            engine.reset();
        }
        let segment: Vec<crate::online::StreamEvent<T>> =
            build_segment(config, &data, &artifacts.standardizer, index, events.len())?;
        for ev in &segment {
            let out = engine.step(ev.unlabeled())?;
            let p = out.prediction;
            events.push(EventRecord {
                t: ev.t,
                condition_id: ev.condition_id,
                hidden_label: ev.hidden_label,
                pseudo_label: p.pseudo_label,
                confidence: p.confidence,
                accepted: p.accepted,
                correct: p.pseudo_label == ev.hidden_label,
            });
        }
    }

    let bounds = segment_bounds(config);
    let segments = bounds
        .iter()
        .enumerate()
        .map(|(index, &(start, end))| {
            let condition = config.online_sequence[index].condition;
            let slice = &events[start..end];
            SegmentResult {
                index,
                condition,
                tag: config.tag_of(condition),
                events: slice.len(),
                accuracy: slice.iter().filter(|e| e.correct).count() as f64 / slice.len() as f64,
            }
        })
        .collect();

    let result = TrialResult {
        method,
        seed: trial_seed,
        per_condition_accuracy: per_condition(&events),
        segments,
        update_count: engine.update_count(),
        initial_digest,
        final_digest: engine.model().param_digest(),
        curve: running_curve(&events, &bounds),
    };
    Ok(TrialOutput {
        result,
        events,
        updates: engine.updates().to_vec(),
    })
}

/// Trains the offline model the method needs and runs the trial.
pub fn run_trial<T: Real>(
    config: &ExperimentConfig,
    method: Method,
    trial_seed: u64,
) -> Result<TrialOutput> {
    let artifacts = prepare_offline::<T>(config, trial_seed, offline_mode(method))?;
    run_trial_with(config, method, trial_seed, &artifacts)
}

/// `[start, end)` event ranges of each segment.
pub fn segment_bounds(config: &ExperimentConfig) -> Vec<(usize, usize)> {
    let mut start = 0;
    config
        .online_sequence
        .iter()
        .map(|s| {
            let b = (start, start + s.length);
            start += s.length;
            b
        })
        .collect()
}

fn per_condition(events: &[EventRecord]) -> BTreeMap<usize, f64> {
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for e in events {
        let c = counts.entry(e.condition_id).or_default();
        c.0 += usize::from(e.correct);
        c.1 += 1;
    }
    counts
        .into_iter()
        .map(|(k, (ok, n))| (k, ok as f64 / n as f64))
        .collect()
}

fn running_curve(events: &[EventRecord], bounds: &[(usize, usize)]) -> Vec<CurvePoint> {
    let mut out = Vec::with_capacity(events.len());
    let mut correct = 0usize;
    for &(start, end) in bounds {
        let mut seg_correct = 0usize;
        for (j, e) in events[start..end].iter().enumerate() {
            correct += usize::from(e.correct);
            seg_correct += usize::from(e.correct);
            let t = start + j + 1;
            out.push(CurvePoint {
                t,
                condition_id: e.condition_id,
                running_acc: correct as f64 / t as f64,
                segment_acc: seg_correct as f64 / (j + 1) as f64,
            });
        }
    }
    out
}

pub fn write_events_csv(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in events {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_csv(path: &Path) -> Result<Vec<EventRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Columns: `trigger_index, trigger_event, offline_size, online_size,
/// online_pseudo, skipped, mean_loss_first_epoch, mean_loss_last_epoch`.
pub fn write_updates_csv(path: &Path, updates: &[UpdateReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "trigger_index",
        "trigger_event",
        "offline_size",
        "online_size",
        "online_pseudo",
        "skipped",
        "mean_loss_first_epoch",
        "mean_loss_last_epoch",
    ])?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for u in updates {
        w.write_record([
            u.index.to_string(),
            u.trigger_event.to_string(),
            u.offline_size.to_string(),
            u.online_size.to_string(),
            u.online_pseudo.to_string(),
            u.skipped.to_string(),
            fmt(u.first_loss()),
            fmt(u.last_loss()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
