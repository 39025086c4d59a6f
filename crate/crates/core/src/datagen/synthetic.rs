//! Closed-form multi-condition signal generator.
//!
//! Channel `c` of a record for fault `f` under load `L` is
//!
//! ```text
//! x_c(t) = s(L) * sum_{h=1..3} (1/h) * sin(2*pi*h*f0_f*r(L)*t/fs + h*(theta + c*pi/4)) + noise
//! s(L)   = 1 + amp_slope  * (L - load_ref)
//! r(L)   = 1 + freq_slope * (L - load_ref)
//! ```
//!
//! `theta` is a per-record phase drawn from the spec seed and the
//! `(condition, fault)` pair; the noise is i.i.d. Gaussian with std
//! `noise_sigma`, seeded by `(seed, condition, fault, duration)`.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SignalRecord;
use crate::error::{Error, Result};
use crate::seeds::rng_for;

/// Harmonic orders summed per channel (fundamental plus two).
pub const HARMONICS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_conditions: usize,
    pub n_faults: usize,
    /// One load level per condition, arbitrary units.
    pub load_levels: Vec<f64>,
    /// Fundamental frequency per fault class.
    pub base_freqs_hz: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default = "default_channels")]
    pub n_channels: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub load_ref: f64,
    #[serde(default = "default_amp_slope")]
    pub amp_slope: f64,
    #[serde(default = "default_freq_slope")]
    pub freq_slope: f64,
}

fn default_channels() -> usize {
    6
}
fn default_sample_rate() -> f64 {
    12_800.0
}
fn default_amp_slope() -> f64 {
    0.3
}
fn default_freq_slope() -> f64 {
    0.05
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_conditions == 0 || self.n_faults == 0 || self.n_channels == 0 {
            return Err(Error::config(
                "synthetic spec needs >= 1 condition, fault and channel",
            ));
        }
        if self.load_levels.len() != self.n_conditions {
            return Err(Error::config(format!(
                "load_levels has {} entries for {} conditions",
                self.load_levels.len(),
                self.n_conditions
            )));
        }
        if self.base_freqs_hz.len() != self.n_faults {
            return Err(Error::config(format!(
                "base_freqs_hz has {} entries for {} faults",
                self.base_freqs_hz.len(),
                self.n_faults
            )));
        }
        let bad_noise = self.noise_sigma.is_nan() || self.noise_sigma < 0.0;
        if bad_noise || self.sample_rate_hz.is_nan() || self.sample_rate_hz <= 0.0 {
            return Err(Error::config(
                "noise_sigma must be >= 0 and sample_rate_hz > 0",
            ));
        }
        for &load in &self.load_levels {
            let (s, r) = self.load_factors(load);
            if !(s > 0.0 && r > 0.0) {
                return Err(Error::config(format!(
                    "load {load} gives a non-positive scale"
                )));
            }
        }
        Ok(())
    }

    /// `(amplitude scale, frequency scale)` for a load level.
    pub fn load_factors(&self, load: f64) -> (f64, f64) {
        let delta = load - self.load_ref;
        (1.0 + self.amp_slope * delta, 1.0 + self.freq_slope * delta)
    }

    fn check_ids(&self, condition_id: usize, fault_label: usize) -> Result<()> {
        if condition_id >= self.n_conditions {
            return Err(Error::Index {
                what: "condition",
                index: condition_id,
                limit: self.n_conditions,
            });
        }
        if fault_label >= self.n_faults {
            return Err(Error::Index {
                what: "fault",
                index: fault_label,
                limit: self.n_faults,
            });
        }
        Ok(())
    }

    /// Noise-free signal model of one `(condition, fault)` record.
    pub fn harmonic_model(&self, condition_id: usize, fault_label: usize) -> Result<HarmonicModel> {
        self.check_ids(condition_id, fault_label)?;
        let (amplitude, freq_scale) = self.load_factors(self.load_levels[condition_id]);
        let mut rng = rng_for(
            self.seed,
            "synthetic-phase",
            &[condition_id as u64, fault_label as u64],
        );
        let phase = rng.random_range(0.0..2.0 * PI);
        Ok(HarmonicModel {
            amplitude,
            fundamental_hz: self.base_freqs_hz[fault_label] * freq_scale,
            phase,
            sample_rate_hz: self.sample_rate_hz,
        })
    }
}

/// Closed-form noiseless component of a record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicModel {
    pub amplitude: f64,
    pub fundamental_hz: f64,
    pub phase: f64,
    pub sample_rate_hz: f64,
}

impl HarmonicModel {
    pub fn value(&self, channel: usize, t: usize) -> f64 {
        let omega = 2.0 * PI * self.fundamental_hz * t as f64 / self.sample_rate_hz;
        let offset = self.phase + channel as f64 * PI / 4.0;
        let sum: f64 = (1..=HARMONICS)
            .map(|h| {
                let h = h as f64;
                (h * (omega + offset)).sin() / h
            })
            .sum();
        self.amplitude * sum
    }
}

/// Generates one record of `duration_steps` timesteps.
pub fn generate_record(
    spec: &SyntheticSpec,
    condition_id: usize,
    fault_label: usize,
    duration_steps: usize,
) -> Result<SignalRecord> {
    generate_segment(spec, condition_id, fault_label, duration_steps, 0, 0)
}

/// Like [`generate_record`] but starting at timestep `start`, with noise
/// drawn from the independent sub-stream `stream`. Stream 0 at start 0 is
/// exactly [`generate_record`].
pub fn generate_segment(
    spec: &SyntheticSpec,
    condition_id: usize,
    fault_label: usize,
    duration_steps: usize,
    start: usize,
    stream: u64,
) -> Result<SignalRecord> {
    spec.validate()?;
    let model = spec.harmonic_model(condition_id, fault_label)?;
    if duration_steps == 0 {
        return Err(Error::EmptyInput("duration_steps must be > 0".into()));
    }
    let mut channels = Array2::from_shape_fn((spec.n_channels, duration_steps), |(c, t)| {
        model.value(c, start + t)
    });
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        let mut parts = vec![
            condition_id as u64,
            fault_label as u64,
            duration_steps as u64,
        ];
        if start != 0 || stream != 0 {
            parts.extend([start as u64, stream]);
        }
        let mut rng = rng_for(spec.seed, "synthetic-noise", &parts);
        channels
            .iter_mut()
            .for_each(|v| *v += normal.sample(&mut rng));
    }
    SignalRecord::new(channels, condition_id, fault_label, spec.sample_rate_hz)
}
