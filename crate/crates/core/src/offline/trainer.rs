use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{ArchConfig, DannBatch, DannModel, Seam};
use super::schedule::LambdaSchedule;
use crate::datagen::{Standardizer, WindowedSample};
use crate::error::{Error, Result};
use crate::nncore::{AdamConfig, AdamState, Real};
use crate::seeds::rng_for;

/// Labelled offline data, already standardized.
///
/// `conditions` holds domain indices in `0..n_conditions`.
#[derive(Debug, Clone)]
pub struct OfflineDataset<T: Real> {
    pub x: Array2<T>,
    pub faults: Vec<usize>,
    pub conditions: Vec<usize>,
    pub n_faults: usize,
    pub n_conditions: usize,
}

impl<T: Real> OfflineDataset<T> {
    pub fn new(
        x: Array2<T>,
        faults: Vec<usize>,
        conditions: Vec<usize>,
        n_faults: usize,
        n_conditions: usize,
    ) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::EmptyInput("offline dataset".into()));
        }
        if faults.len() != n || conditions.len() != n {
            return Err(Error::shape(
                "offline labels",
                n,
                faults.len().min(conditions.len()),
            ));
        }
        let mut seen_f = vec![false; n_faults];
        let mut seen_c = vec![false; n_conditions];
        for (&f, &c) in faults.iter().zip(&conditions) {
            *seen_f.get_mut(f).ok_or(Error::Index {
                what: "fault label",
                index: f,
                limit: n_faults,
            })? = true;
            *seen_c.get_mut(c).ok_or(Error::Index {
                what: "condition label",
                index: c,
                limit: n_conditions,
            })? = true;
        }
        if let Some(f) = seen_f.iter().position(|s| !s) {
            return Err(Error::EmptyInput(format!(
                "fault class {f} has no offline samples"
            )));
        }
        if let Some(c) = seen_c.iter().position(|s| !s) {
            return Err(Error::EmptyInput(format!(
                "condition {c} has no offline samples"
            )));
        }
        Ok(Self {
            x,
            faults,
            conditions,
            n_faults,
            n_conditions,
        })
    }

    /// Standardizes windows and maps each window's condition id to a domain
    /// index with `domain_of`.
    pub fn from_windows(
        samples: &[WindowedSample],
        standardizer: &Standardizer,
        domain_of: impl Fn(usize) -> Option<usize>,
        n_faults: usize,
        n_conditions: usize,
    ) -> Result<Self> {
        let dim = standardizer.dim();
        let mut data = Vec::with_capacity(samples.len() * dim);
        let mut faults = Vec::with_capacity(samples.len());
        let mut conditions = Vec::with_capacity(samples.len());
        for s in samples {
            let domain = domain_of(s.condition_id).ok_or_else(|| {
                Error::config(format!(
                    "condition {} is not an offline condition",
                    s.condition_id
                ))
            })?;
            data.extend(standardizer.apply::<T>(&s.features)?);
            faults.push(s.fault_label);
            conditions.push(domain);
        }
        let x = Array2::from_shape_vec((samples.len(), dim), data).expect("rows have dim features");
        Self::new(x, faults, conditions, n_faults, n_conditions)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn select(&self, rows: &[usize]) -> (Array2<T>, Vec<usize>, Vec<usize>) {
        (
            self.x.select(Axis(0), rows),
            rows.iter().map(|&i| self.faults[i]).collect(),
            rows.iter().map(|&i| self.conditions[i]).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// Gradient-reversal DANN training.
    #[default]
    Adversarial,
    /// Cross-entropy on the fault labels only.
    SourceOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    #[serde(default)]
    pub schedule: LambdaSchedule,
    #[serde(default)]
    pub mode: TrainingMode,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            optimizer: AdamConfig::with_lr(1e-3),
            schedule: LambdaSchedule::default(),
            mode: TrainingMode::Adversarial,
        }
    }
}

impl OfflineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("offline batch size must be >= 1"));
        }
        self.optimizer.validate()?;
        self.schedule.validate()
    }
}

/// One Adam state per sub-network, sharing a learning rate.
#[derive(Debug, Clone)]
pub struct DannOptimizers<T: Real> {
    pub feature: AdamState<T>,
    pub fault_head: AdamState<T>,
    pub condition_head: AdamState<T>,
}

impl<T: Real> DannOptimizers<T> {
    pub fn new(model: &DannModel<T>, config: AdamConfig) -> Result<Self> {
        Ok(Self {
            feature: AdamState::new(&model.feature, config)?,
            fault_head: AdamState::new(&model.fault_head, config)?,
            condition_head: AdamState::new(&model.condition_head, config)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub loss_f: f64,
    pub loss_c: Option<f64>,
    pub fault_correct: usize,
    pub reversal_applied: bool,
}

/// One simultaneous update: the extractor and fault head descend the fault
/// loss, the discriminator descends the condition loss, and the extractor
/// also receives `-lambda` times the condition-loss gradient at the features.
pub fn dann_train_step<T: Real>(
    model: &mut DannModel<T>,
    optimizers: &mut DannOptimizers<T>,
    batch: DannBatch<'_, T>,
    lambda: f64,
    mode: TrainingMode,
) -> Result<StepReport> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::contract(format!("lambda {lambda} outside [0, 1]")));
    }
    let seam = match mode {
        TrainingMode::Adversarial => Seam::Reverse(T::from_f64_lossy(lambda)),
        TrainingMode::SourceOnly => Seam::Detached,
    };
    let grads = model.gradients(batch, seam)?;
    optimizers
        .feature
        .step(&mut model.feature, &grads.feature)?;
    optimizers
        .fault_head
        .step(&mut model.fault_head, &grads.fault_head)?;
    if let Some(gc) = &grads.condition_head {
        optimizers
            .condition_head
            .step(&mut model.condition_head, gc)?;
    }
    Ok(StepReport {
        loss_f: grads.loss_f.as_f64(),
        loss_c: grads.loss_c.map(Real::as_f64),
        fault_correct: grads.fault_correct,
        reversal_applied: grads.reversal_applied,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_f: f64,
    pub loss_c: Option<f64>,
    pub lambda: f64,
    pub train_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub total_steps: usize,
    /// Steps in which the reversed condition gradient reached the extractor.
    pub reversal_steps: usize,
}

impl TrainingLog {
    /// CSV with columns `epoch,loss_f,loss_c,lambda,train_acc`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "loss_f", "loss_c", "lambda", "train_acc"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.loss_f.to_string(),
                e.loss_c.map(|v| v.to_string()).unwrap_or_default(),
                e.lambda.to_string(),
                e.train_acc.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Freshly initialized model from the `init` seed stream of `seed`.
pub fn init_model<T: Real>(
    arch: &ArchConfig,
    n_faults: usize,
    n_conditions: usize,
    seed: u64,
) -> Result<DannModel<T>> {
    if arch.input_dim == 0 {
        return Err(Error::config("input_dim must be > 0"));
    }
    DannModel::new(
        arch,
        n_faults,
        n_conditions,
        &mut rng_for(seed, "init", &[]),
    )
}

/// Trains an initialized model on shuffled mini-batches; lambda follows the
/// schedule with progress = completed steps / total steps.
pub fn train_model<T: Real>(
    model: &mut DannModel<T>,
    dataset: &OfflineDataset<T>,
    config: &OfflineConfig,
    seed: u64,
) -> Result<TrainingLog> {
    train_model_with_state(model, dataset, config, seed).map(|(log, _)| log)
}

/// Like [`train_model`], also handing back the final Adam moments.
pub fn train_model_with_state<T: Real>(
    model: &mut DannModel<T>,
    dataset: &OfflineDataset<T>,
    config: &OfflineConfig,
    seed: u64,
) -> Result<(TrainingLog, DannOptimizers<T>)> {
    config.validate()?;
    if model.input_dim() != dataset.x.ncols() {
        return Err(Error::shape(
            "offline dataset width",
            model.input_dim(),
            dataset.x.ncols(),
        ));
    }
    if config.mode == TrainingMode::Adversarial && dataset.n_conditions < 2 {
        return Err(Error::config(
            "adversarial training needs at least two conditions",
        ));
    }
    let mut optimizers = DannOptimizers::new(model, config.optimizer)?;
    let mut rng = rng_for(seed, "shuffle", &[]);
    let n = dataset.len();
    let steps_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut log = TrainingLog {
        total_steps,
        ..Default::default()
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut sum_f, mut sum_c, mut correct) = (0.0, 0.0, 0usize);
        let mut lambda = 0.0;
        for chunk in order.chunks(config.batch_size) {
            lambda = config
                .schedule
                .lambda_at(step as f64 / total_steps as f64)?;
            let (x, faults, conditions) = dataset.select(chunk);
            let batch = DannBatch {
                x: &x,
                faults: &faults,
                conditions: &conditions,
            };
            let report = dann_train_step(model, &mut optimizers, batch, lambda, config.mode)?;
            let b = chunk.len() as f64;
            sum_f += report.loss_f * b;
            sum_c += report.loss_c.unwrap_or(0.0) * b;
            correct += report.fault_correct;
            if report.reversal_applied {
                log.reversal_steps += 1;
            }
            step += 1;
        }
        let entry = EpochLog {
            epoch,
            loss_f: sum_f / n as f64,
            loss_c: (config.mode == TrainingMode::Adversarial).then_some(sum_c / n as f64),
            lambda,
            train_acc: correct as f64 / n as f64,
        };
        log::debug!(
            "offline epoch {epoch}: loss_f {:.4} loss_c {:?} lambda {:.3} acc {:.4}",
            entry.loss_f,
            entry.loss_c,
            entry.lambda,
            entry.train_acc
        );
        log.epochs.push(entry);
    }
    Ok((log, optimizers))
}

/// [`init_model`] followed by [`train_model`].
pub fn train_offline<T: Real>(
    dataset: &OfflineDataset<T>,
    arch: &ArchConfig,
    config: &OfflineConfig,
    seed: u64,
) -> Result<(DannModel<T>, TrainingLog)> {
    let mut model = init_model(arch, dataset.n_faults, dataset.n_conditions, seed)?;
    let log = train_model(&mut model, dataset, config, seed)?;
    Ok((model, log))
}

/// Fraction of rows whose argmax fault logit matches the label.
pub fn accuracy<T: Real>(model: &DannModel<T>, x: &Array2<T>, labels: &[usize]) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("accuracy batch".into()));
    }
    let logits = model.fault_logits(x)?;
    Ok(super::model::count_correct(&logits, labels) as f64 / x.nrows() as f64)
}
