//! Offline domain-adversarial training and replay-guided online test-time
//! adaptation for streaming fault classification.
//!
//! Modules, bottom-up:
//!
//! - [`nncore`]: dense networks with manual backprop, softmax cross-entropy,
//!   gradient reversal and Adam.
//! - [`datagen`]: synthetic multi-condition signals, CSV ingestion, windows.
//! - [`offline`]: DANN training and the offline memory bank.
//! - [`memory`]: offline/online banks and joint replay sampling.
//! - [`online`]: the streaming adaptation engine.
//! - [`harness`]: stream construction, trials, ablations and reports.

pub mod datagen;
pub mod error;
pub mod harness;
pub mod memory;
pub mod nncore;
pub mod offline;
pub mod online;
pub mod seeds;

pub use error::{Error, Result};
