use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{grad_reverse, softmax_cross_entropy, Activation, MlpNetwork, NetGrads, Real};

/// Layer widths of the three sub-networks.
///
/// The feature extractor maps `input_dim` through `feature_hidden` to
/// `feature_dim`; both heads read that feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub input_dim: usize,
    pub feature_hidden: Vec<usize>,
    pub feature_dim: usize,
    pub classifier_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
}

impl ArchConfig {
    /// 6144-1024-512-256-128 extractor, 128-32-N_f classifier,
    /// 128-128-128-64-M discriminator.
    pub fn full_scale(input_dim: usize) -> Self {
        Self {
            input_dim,
            feature_hidden: vec![1024, 512, 256],
            feature_dim: 128,
            classifier_hidden: vec![32],
            discriminator_hidden: vec![128, 128, 64],
        }
    }

    fn chain(first: usize, hidden: &[usize], last: usize) -> Vec<usize> {
        let mut dims = vec![first];
        dims.extend_from_slice(hidden);
        dims.push(last);
        dims
    }

    pub fn feature_dims(&self) -> Vec<usize> {
        Self::chain(self.input_dim, &self.feature_hidden, self.feature_dim)
    }

    pub fn classifier_dims(&self, n_faults: usize) -> Vec<usize> {
        Self::chain(self.feature_dim, &self.classifier_hidden, n_faults)
    }

    pub fn discriminator_dims(&self, n_conditions: usize) -> Vec<usize> {
        Self::chain(self.feature_dim, &self.discriminator_hidden, n_conditions)
    }
}

/// Feature extractor, fault classifier and condition discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct DannModel<T: Real> {
    pub feature: MlpNetwork<T>,
    pub fault_head: MlpNetwork<T>,
    pub condition_head: MlpNetwork<T>,
}

/// How the condition branch's gradient reaches the feature extractor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Seam<T> {
    /// Gradient reversal with weight `lambda`.
    Reverse(T),
    /// Unreversed gradient (reference pipeline for checking the reversal).
    Passthrough,
    /// Condition branch not evaluated; plain cross-entropy training.
    Detached,
}

/// One labelled mini-batch: inputs, fault labels, condition labels.
#[derive(Debug, Clone, Copy)]
pub struct DannBatch<'a, T: Real> {
    pub x: &'a Array2<T>,
    pub faults: &'a [usize],
    pub conditions: &'a [usize],
}

#[derive(Debug, Clone)]
pub struct DannGradients<T: Real> {
    pub feature: NetGrads<T>,
    pub fault_head: NetGrads<T>,
    /// `None` when the seam is detached.
    pub condition_head: Option<NetGrads<T>>,
    pub loss_f: T,
    pub loss_c: Option<T>,
    /// Gradient reaching the features from the fault branch.
    pub dh_fault: Array2<T>,
    /// Gradient the feature extractor receives from the condition branch,
    /// after the seam transform.
    pub dh_condition: Option<Array2<T>>,
    pub fault_correct: usize,
    pub reversal_applied: bool,
}

impl<T: Real> DannModel<T> {
    pub fn new<R: Rng + ?Sized>(
        arch: &ArchConfig,
        n_faults: usize,
        n_conditions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_faults == 0 || n_conditions == 0 {
            return Err(Error::config(
                "need at least one fault class and one condition",
            ));
        }
        let feature = MlpNetwork::new(
            &arch.feature_dims(),
            Activation::Relu,
            Activation::Relu,
            rng,
        )?;
        let fault_head = MlpNetwork::new(
            &arch.classifier_dims(n_faults),
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        let condition_head = MlpNetwork::new(
            &arch.discriminator_dims(n_conditions),
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        Self::from_parts(feature, fault_head, condition_head)
    }

    pub fn from_parts(
        feature: MlpNetwork<T>,
        fault_head: MlpNetwork<T>,
        condition_head: MlpNetwork<T>,
    ) -> Result<Self> {
        let f = feature.output_dim();
        if fault_head.input_dim() != f || condition_head.input_dim() != f {
            return Err(Error::Shape {
                context: "dann feature width",
                expected: f.to_string(),
                actual: format!(
                    "classifier {}, discriminator {}",
                    fault_head.input_dim(),
                    condition_head.input_dim()
                ),
            });
        }
        Ok(Self {
            feature,
            fault_head,
            condition_head,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.feature.input_dim()
    }

    pub fn n_faults(&self) -> usize {
        self.fault_head.output_dim()
    }

    pub fn n_conditions(&self) -> usize {
        self.condition_head.output_dim()
    }

    /// Fault-classifier logits on the extracted features.
    pub fn fault_logits(&self, x: &Array2<T>) -> Result<Array2<T>> {
        self.fault_head.infer(&self.feature.infer(x)?)
    }

    /// Combined digest of all three sub-networks.
    pub fn param_digest(&self) -> String {
        format!(
            "{}:{}:{}",
            self.feature.param_digest(),
            self.fault_head.param_digest(),
            self.condition_head.param_digest()
        )
    }

    /// Gradients of the fault loss for the extractor and fault head, of the
    /// condition loss for the discriminator, and the condition branch's
    /// contribution to the extractor routed through `seam`.
    pub fn gradients(&self, batch: DannBatch<'_, T>, seam: Seam<T>) -> Result<DannGradients<T>> {
        let n = batch.x.nrows();
        if n == 0 {
            return Err(Error::EmptyInput("training batch".into()));
        }
        if batch.faults.len() != n || batch.conditions.len() != n {
            return Err(Error::shape(
                "batch labels",
                n,
                format!(
                    "{} faults, {} conditions",
                    batch.faults.len(),
                    batch.conditions.len()
                ),
            ));
        }

        let (h, feature_tape) = self.feature.forward(batch.x)?;
        let (fault_logits, fault_tape) = self.fault_head.forward(&h)?;
        let (loss_f, dlogits_f) = softmax_cross_entropy(&fault_logits, batch.faults)?;
        let (fault_head, dh_fault) = self.fault_head.backward(&fault_tape, &dlogits_f)?;
        let fault_correct = count_correct(&fault_logits, batch.faults);

        let (condition_head, loss_c, dh_condition, reversal_applied) = match seam {
            Seam::Detached => (None, None, None, false),
            Seam::Reverse(_) | Seam::Passthrough => {
                if self.n_conditions() < 2 {
                    return Err(Error::config(
                        "adversarial training needs at least two conditions",
                    ));
                }
                // identity forward through the seam
                let (cond_logits, cond_tape) = self.condition_head.forward(&h)?;
                let (loss_c, dlogits_c) = softmax_cross_entropy(&cond_logits, batch.conditions)?;
                let (gc, dh_raw) = self.condition_head.backward(&cond_tape, &dlogits_c)?;
                let (dh, applied) = match seam {
                    Seam::Reverse(lambda) => (grad_reverse(&dh_raw, lambda)?, true),
                    _ => (dh_raw, false),
                };
                (Some(gc), Some(loss_c), Some(dh), applied)
            }
        };

        let dh_total = match (&dh_condition, seam) {
            // lambda = 0 adds nothing; skipping keeps the extractor gradient bit-identical
            // to source-only training
            (Some(_), Seam::Reverse(lambda)) if lambda == T::zero() => dh_fault.clone(),
            (Some(dc), _) => &dh_fault + dc,
            (None, _) => dh_fault.clone(),
        };
        let (feature, _) = self.feature.backward(&feature_tape, &dh_total)?;

        Ok(DannGradients {
            feature,
            fault_head,
            condition_head,
            loss_f,
            loss_c,
            dh_fault,
            dh_condition,
            fault_correct,
            reversal_applied,
        })
    }
}

pub(crate) fn count_correct<T: Real>(logits: &Array2<T>, targets: &[usize]) -> usize {
    logits
        .rows()
        .into_iter()
        .zip(targets)
        .filter(|(row, &t)| argmax(row.iter().copied()) == t)
        .count()
}

/// Index of the maximum; ties go to the lowest index.
pub(crate) fn argmax<T: Real>(values: impl Iterator<Item = T>) -> usize {
    let mut best = 0;
    let mut best_v = T::neg_infinity();
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}
