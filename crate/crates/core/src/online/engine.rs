use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Method, OnlinePrediction, OttaConfig, UnlabeledSample};
use crate::error::{Error, Result};
use crate::memory::{joint_epoch_batches, resolve_joint, MemoryBank};
use crate::nncore::{softmax_cross_entropy, AdamConfig, AdamState, Real};
use crate::offline::{argmax, DannBatch, DannModel, DannOptimizers, Seam};
use crate::seeds::rng_for;

/// Softmax over the fault logits of one sample, with the confidence gate.
pub fn predict<T: Real>(
    model: &DannModel<T>,
    features: &[T],
    threshold: f64,
) -> Result<OnlinePrediction> {
    if features.len() != model.input_dim() {
        return Err(Error::shape(
            "online sample",
            model.input_dim(),
            features.len(),
        ));
    }
    let x = Array2::from_shape_vec((1, features.len()), features.to_vec())
        .map_err(|e| Error::contract(e.to_string()))?;
    let logits = model.fault_logits(&x)?;
    let row: Vec<f64> = logits.row(0).iter().map(|v| v.as_f64()).collect();
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("online fault logits"));
    }
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();
    let pseudo_label = argmax(probs.iter().copied());
    let confidence = probs[pseudo_label];
    Ok(OnlinePrediction {
        pseudo_label,
        confidence,
        accepted: confidence >= threshold,
        probs,
    })
}

/// Summary of one triggered update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    /// Ordinal of the update within the run, from 0.
    pub index: usize,
    /// Number of stream events seen when the update fired.
    pub trigger_event: usize,
    pub offline_size: usize,
    pub online_size: usize,
    /// Pseudo-labelled entries currently in the online bank.
    pub online_pseudo: usize,
    /// Mean replay cross-entropy of each pass.
    pub epoch_losses: Vec<f64>,
    pub skipped: bool,
}

impl UpdateReport {
    pub fn first_loss(&self) -> Option<f64> {
        self.epoch_losses.first().copied()
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// Result of feeding one event to the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub prediction: OnlinePrediction,
    pub pushed: bool,
    pub update: Option<UpdateReport>,
}

/// Model, online bank and the two optimizers as they were at construction.
type Snapshot<T> = (DannModel<T>, MemoryBank<T>, AdamState<T>, AdamState<T>);

/// Predict-then-adapt loop over an unlabeled stream.
///
/// Updates touch the feature extractor and the fault classifier only; the
/// condition discriminator is carried along untouched.
#[derive(Debug, Clone)]
pub struct OttaEngine<T: Real> {
    model: DannModel<T>,
    offline: MemoryBank<T>,
    online: MemoryBank<T>,
    config: OttaConfig,
    feature_opt: AdamState<T>,
    fault_opt: AdamState<T>,
    rng: ChaCha8Rng,
    events_seen: usize,
    updates: Vec<UpdateReport>,
    initial: Box<Snapshot<T>>,
    empty: MemoryBank<T>,
}

impl<T: Real> OttaEngine<T> {
    /// `carried` supplies the offline optimizer state; it is used only when
    /// `config.fresh_optimizer` is false.
    pub fn new(
        model: DannModel<T>,
        offline: MemoryBank<T>,
        online: MemoryBank<T>,
        config: OttaConfig,
        seed: u64,
        carried: Option<&DannOptimizers<T>>,
    ) -> Result<Self> {
        config.validate()?;
        if !offline.is_frozen() {
            return Err(Error::contract("offline bank must be frozen"));
        }
        for (bank, what) in [(&offline, "offline bank"), (&online, "online bank")] {
            if let Some(d) = bank.feature_dim() {
                if d != model.input_dim() {
                    return Err(Error::shape(what, model.input_dim(), d));
                }
            }
        }
        let (feature_opt, fault_opt) = match (config.fresh_optimizer, carried) {
            (false, Some(o)) => {
                let mut f = o.feature.clone();
                let mut g = o.fault_head.clone();
                f.set_learning_rate(config.online_lr)?;
                g.set_learning_rate(config.online_lr)?;
                (f, g)
            }
            (false, None) => {
                return Err(Error::config(
                    "fresh_optimizer = false needs the offline optimizer state",
                ))
            }
            (true, _) => {
                let adam = AdamConfig::with_lr(config.online_lr);
                (
                    AdamState::new(&model.feature, adam)?,
                    AdamState::new(&model.fault_head, adam)?,
                )
            }
        };
        let initial = Box::new((
            model.clone(),
            online.clone(),
            feature_opt.clone(),
            fault_opt.clone(),
        ));
        Ok(Self {
            model,
            offline,
            online,
            config,
            feature_opt,
            fault_opt,
            rng: rng_for(seed, "replay", &[]),
            events_seen: 0,
            updates: Vec::new(),
            initial,
            empty: MemoryBank::offline(Vec::new())?,
        })
    }

    pub fn model(&self) -> &DannModel<T> {
        &self.model
    }

    pub fn offline_bank(&self) -> &MemoryBank<T> {
        &self.offline
    }

    pub fn online_bank(&self) -> &MemoryBank<T> {
        &self.online
    }

    pub fn config(&self) -> &OttaConfig {
        &self.config
    }

    pub fn updates(&self) -> &[UpdateReport] {
        &self.updates
    }

    pub fn update_count(&self) -> usize {
        self.updates.iter().filter(|u| !u.skipped).count()
    }

    pub fn events_seen(&self) -> usize {
        self.events_seen
    }

    pub fn predict(&self, features: &[T]) -> Result<OnlinePrediction> {
        predict(&self.model, features, self.config.conf_threshold)
    }

    /// Predicts, queues the sample if confident, and fires an update at the
    /// end of every `update_every` stream batches.
    pub fn step(&mut self, sample: UnlabeledSample<'_, T>) -> Result<StepOutcome> {
        let prediction = self.predict(sample.features)?;
        let adapts = self.config.method.adapts();
        let pushed = adapts && prediction.accepted;
        if pushed {
            self.online.push_fifo(
                sample.features.to_vec(),
                prediction.pseudo_label,
                Some(sample.t),
            )?;
        }
        self.events_seen += 1;
        let period = self.config.update_every * self.config.stream_batch_size;
        let update = if adapts && self.events_seen.is_multiple_of(period) {
            Some(self.trigger_update()?)
        } else {
            None
        };
        Ok(StepOutcome {
            prediction,
            pushed,
            update,
        })
    }

    fn replay_offline(&self) -> &MemoryBank<T> {
        match self.config.method {
            Method::Proposed => &self.offline,
            _ => &self.empty,
        }
    }

    /// Runs `update_epochs` passes over the replay source. Methods that do
    /// not adapt are rejected.
    pub fn trigger_update(&mut self) -> Result<UpdateReport> {
        if !self.config.method.adapts() {
            return Err(Error::contract(format!(
                "method {} does not update online",
                self.config.method
            )));
        }
        let mut report = UpdateReport {
            index: self.updates.len(),
            trigger_event: self.events_seen,
            offline_size: self.replay_offline().len(),
            online_size: self.online.len(),
            online_pseudo: self.online.entries().filter(|e| !e.seed).count(),
            epoch_losses: Vec::new(),
            skipped: false,
        };
        if report.offline_size + report.online_size == 0 {
            log::warn!("update {} skipped: replay source is empty", report.index);
            report.skipped = true;
            self.updates.push(report.clone());
            return Ok(report);
        }
        for _ in 0..self.config.update_epochs {
            let off = match self.config.method {
                Method::Proposed => &self.offline,
                _ => &self.empty,
            };
            let batches = joint_epoch_batches(
                off,
                &self.online,
                self.config.replay_batch_size,
                &mut self.rng,
            )?;
            let (mut sum, mut count) = (0.0f64, 0usize);
            for idx in batches {
                let (x, labels) = gather(off, &self.online, &idx, self.model.input_dim())?;
                let conditions = vec![0; labels.len()];
                let grads = self.model.gradients(
                    DannBatch {
                        x: &x,
                        faults: &labels,
                        conditions: &conditions,
                    },
                    Seam::Detached,
                )?;
                self.feature_opt
                    .step(&mut self.model.feature, &grads.feature)?;
                self.fault_opt
                    .step(&mut self.model.fault_head, &grads.fault_head)?;
                sum += grads.loss_f.as_f64() * labels.len() as f64;
                count += labels.len();
            }
            report.epoch_losses.push(sum / count as f64);
        }
        log::debug!(
            "update {} at event {}: |off| {} |on| {} loss {:?} -> {:?}",
            report.index,
            report.trigger_event,
            report.offline_size,
            report.online_size,
            report.first_loss(),
            report.last_loss()
        );
        self.updates.push(report.clone());
        Ok(report)
    }

    /// Mean cross-entropy of the current model over the whole replay source.
    pub fn replay_loss(&self) -> Result<f64> {
        let off = match self.config.method {
            Method::WithoutReplay => &self.empty,
            _ => &self.offline,
        };
        let total = off.len() + self.online.len();
        if total == 0 {
            return Err(Error::EmptyBank("replay source"));
        }
        let idx: Vec<_> = (0..off.len())
            .map(crate::memory::JointIndex::Offline)
            .chain((0..self.online.len()).map(crate::memory::JointIndex::Online))
            .collect();
        let (x, labels) = gather(off, &self.online, &idx, self.model.input_dim())?;
        let logits = self.model.fault_logits(&x)?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        Ok(loss.as_f64())
    }

    /// Restores the model, the online bank and the optimizer moments to their
    /// state at construction. Update history and the event counter are kept.
    pub fn reset(&mut self) {
        let (model, online, f, g) = (*self.initial).clone();
        self.model = model;
        self.online = online;
        self.feature_opt = f;
        self.fault_opt = g;
    }
}

fn gather<T: Real>(
    off: &MemoryBank<T>,
    on: &MemoryBank<T>,
    idx: &[crate::memory::JointIndex],
    dim: usize,
) -> Result<(Array2<T>, Vec<usize>)> {
    let mut x = Array2::zeros((idx.len(), dim));
    let mut labels = Vec::with_capacity(idx.len());
    for (row, &i) in idx.iter().enumerate() {
        let e = resolve_joint(off, on, i);
        if e.features.len() != dim {
            return Err(Error::shape("replay sample", dim, e.features.len()));
        }
        x.row_mut(row)
            .iter_mut()
            .zip(&e.features)
            .for_each(|(d, s)| *d = *s);
        labels.push(e.label);
    }
    Ok((x, labels))
}
