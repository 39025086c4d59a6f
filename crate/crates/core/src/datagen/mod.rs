//! Model-ready windowed samples: synthetic multi-condition signals, CSV
//! ingestion, sliding windows and frozen standardization.

mod csv_io;
mod manifest;
mod standardize;
mod synthetic;
mod window;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use csv_io::{ingest_csv, write_csv, CsvSchema};
pub use manifest::{DatasetManifest, ManifestRecord, RecordSplit};
pub use standardize::Standardizer;
pub use synthetic::{generate_record, generate_segment, HarmonicModel, SyntheticSpec, HARMONICS};
pub use window::{window_count, window_record};

use crate::error::{Error, Result};

/// Multi-channel recording: `channels` is `k x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub channels: Array2<f64>,
    pub condition_id: usize,
    pub fault_label: usize,
    pub sample_rate_hz: f64,
}

impl SignalRecord {
    pub fn new(
        channels: Array2<f64>,
        condition_id: usize,
        fault_label: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if channels.nrows() == 0 || channels.ncols() == 0 {
            return Err(Error::EmptyInput("signal record has no data".into()));
        }
        if sample_rate_hz.is_nan() || sample_rate_hz <= 0.0 {
            return Err(Error::config("sample rate must be positive"));
        }
        Ok(Self {
            channels,
            condition_id,
            fault_label,
            sample_rate_hz,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.channels.nrows()
    }

    pub fn len(&self) -> usize {
        self.channels.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

/// One flattened window, channel-major: all of channel 0, then channel 1, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSample {
    pub features: Vec<f32>,
    pub fault_label: usize,
    pub condition_id: usize,
    /// Start timestep of the window in its parent record.
    pub source_index: usize,
}
