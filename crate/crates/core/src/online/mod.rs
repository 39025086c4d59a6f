//! Online test-time adaptation: predict, filter by confidence, queue
//! pseudo-labelled samples and periodically replay the memory banks.
//!
//! The engine only ever sees [`UnlabeledSample`]s. Ground truth lives in
//! [`StreamEvent`], which the evaluation loop keeps to itself.

mod engine;

use serde::{Deserialize, Serialize};

pub use engine::{predict, OttaEngine, StepOutcome, UpdateReport};

use crate::error::{Error, Result};
use crate::nncore::Real;

/// The four ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Source-only MLP, no adaptation.
    Baseline,
    /// Offline DANN applied as-is.
    WithoutUpdate,
    /// Online updates from the online bank only.
    WithoutReplay,
    /// Online updates replaying the offline and online banks together.
    Proposed,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Baseline,
        Method::WithoutUpdate,
        Method::WithoutReplay,
        Method::Proposed,
    ];

    pub fn adapts(self) -> bool {
        matches!(self, Method::WithoutReplay | Method::Proposed)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::WithoutUpdate => "without_update",
            Method::WithoutReplay => "without_replay",
            Method::Proposed => "proposed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OttaConfig {
    /// Minimum max-probability for a pseudo-label to enter the online bank.
    pub conf_threshold: f64,
    /// Stream batches between updates.
    pub update_every: usize,
    /// Passes over the replay source per update.
    pub update_epochs: usize,
    pub replay_batch_size: usize,
    pub online_lr: f64,
    pub method: Method,
    /// Events per stream batch.
    #[serde(default = "default_stream_batch")]
    pub stream_batch_size: usize,
    /// Start the online phase with zeroed Adam moments.
    #[serde(default = "default_true")]
    pub fresh_optimizer: bool,
}

fn default_stream_batch() -> usize {
    128
}
fn default_true() -> bool {
    true
}

impl Default for OttaConfig {
    fn default() -> Self {
        Self {
            conf_threshold: 0.9,
            update_every: 1,
            update_epochs: 30,
            replay_batch_size: 128,
            online_lr: 1e-4,
            method: Method::Proposed,
            stream_batch_size: default_stream_batch(),
            fresh_optimizer: true,
        }
    }
}

impl OttaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err(Error::config("conf_threshold must lie in [0, 1]"));
        }
        if self.update_every == 0 || self.replay_batch_size == 0 || self.stream_batch_size == 0 {
            return Err(Error::config(
                "update_every, replay_batch_size and stream_batch_size must be >= 1",
            ));
        }
        if !(self.online_lr > 0.0 && self.online_lr.is_finite()) {
            return Err(Error::config("online_lr must be positive"));
        }
        Ok(())
    }
}

/// One time step of the online phase, including evaluation-only fields.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamEvent<T: Real> {
    pub t: usize,
    pub features: Vec<T>,
    pub hidden_label: usize,
    pub condition_id: usize,
}

/// What the adaptation engine is allowed to see of an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnlabeledSample<'a, T: Real> {
    pub t: usize,
    pub features: &'a [T],
}

impl<T: Real> StreamEvent<T> {
    pub fn unlabeled(&self) -> UnlabeledSample<'_, T> {
        UnlabeledSample {
            t: self.t,
            features: &self.features,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlinePrediction {
    pub pseudo_label: usize,
    pub confidence: f64,
    pub probs: Vec<f64>,
    pub accepted: bool,
}
