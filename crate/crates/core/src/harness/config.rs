use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{DatasetManifest, SyntheticSpec};
use crate::error::{Error, Result};
use crate::nncore::AdamConfig;
use crate::offline::{ArchConfig, LambdaSchedule, OfflineConfig};
use crate::online::{Method, OttaConfig};

/// Schema version written into and required from every config file.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Generated signals. `seed` is mixed with each trial seed.
    Synthetic(SyntheticSpec),
    /// CSV recordings listed in a manifest file, relative to the config.
    Manifest { path: PathBuf },
}

/// One condition segment of the online stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub condition: usize,
    pub length: usize,
    /// Fraction of the segment before the fault appears.
    pub injection_fraction: f64,
    pub fault_label: usize,
}

impl SegmentSpec {
    /// Index of the first faulty event.
    pub fn injection_index(&self) -> usize {
        (self.injection_fraction * self.length as f64).floor() as usize
    }
}

/// Hidden-layer widths; the input width follows from the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_hidden: Vec<usize>,
    pub feature_dim: usize,
    pub classifier_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
}

impl ModelConfig {
    pub fn arch(&self, input_dim: usize) -> ArchConfig {
        ArchConfig {
            input_dim,
            feature_hidden: self.feature_hidden.clone(),
            feature_dim: self.feature_dim,
            classifier_hidden: self.classifier_hidden.clone(),
            discriminator_hidden: self.discriminator_hidden.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    /// Offline bank samples per `(condition, fault)` cell.
    pub per_cell: usize,
    pub online_capacity: usize,
    /// Offline entries copied into the online bank; `min(capacity, 256)` if unset.
    #[serde(default)]
    pub n_seed: Option<usize>,
}

impl BankConfig {
    pub fn seed_count(&self) -> usize {
        self.n_seed.unwrap_or(self.online_capacity.min(256))
    }
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            per_cell: 100,
            online_capacity: 1024,
            n_seed: None,
        }
    }
}

/// Full description of an experiment. Serialized as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub trials: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    pub window: usize,
    pub step: usize,
    #[serde(default)]
    pub healthy_label: usize,
    pub offline_conditions: Vec<usize>,
    /// Windows per `(condition, fault)` in the offline training set
    /// (synthetic data only; manifests use what the recordings hold).
    pub offline_windows_per_cell: usize,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Restore the offline model and online bank at each segment boundary.
    #[serde(default)]
    pub reset_at_boundary: bool,
    pub online_sequence: Vec<SegmentSpec>,
    pub data: DataSource,
    pub model: ModelConfig,
    pub offline: OfflineConfig,
    pub bank: BankConfig,
    pub otta: OttaConfig,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// Desk-scale run: two offline loads, two unseen loads, four classes,
    /// three channels, 256-sample windows.
    pub fn desk() -> Self {
        Self {
            version: CONFIG_VERSION,
            trials: 5,
            base_seed: 2024,
            output_dir: PathBuf::from("runs/desk"),
            methods: all_methods(),
            window: 256,
            step: 64,
            healthy_label: 0,
            offline_conditions: vec![0, 1],
            offline_windows_per_cell: 300,
            standardize: true,
            reset_at_boundary: false,
            online_sequence: vec![
                SegmentSpec {
                    condition: 2,
                    length: 2000,
                    injection_fraction: 0.3,
                    fault_label: 1,
                },
                SegmentSpec {
                    condition: 3,
                    length: 2000,
                    injection_fraction: 0.5,
                    fault_label: 2,
                },
                SegmentSpec {
                    condition: 0,
                    length: 2000,
                    injection_fraction: 0.7,
                    fault_label: 3,
                },
                SegmentSpec {
                    condition: 1,
                    length: 2000,
                    injection_fraction: 0.5,
                    fault_label: 2,
                },
            ],
            data: DataSource::Synthetic(SyntheticSpec {
                n_conditions: 4,
                n_faults: 4,
                // the two unseen loads sit between the two training loads
                load_levels: vec![1.0, 4.0, 2.0, 3.0],
                base_freqs_hz: vec![400.0, 600.0, 800.0, 1000.0],
                noise_sigma: 0.5,
                seed: 0,
                n_channels: 3,
                sample_rate_hz: 12_800.0,
                load_ref: 2.5,
                amp_slope: 0.3,
                freq_slope: 0.05,
            }),
            model: ModelConfig {
                feature_hidden: vec![128],
                feature_dim: 64,
                classifier_hidden: vec![32],
                discriminator_hidden: vec![64, 32],
            },
            offline: OfflineConfig {
                epochs: 20,
                batch_size: 128,
                optimizer: AdamConfig::with_lr(1e-3),
                schedule: LambdaSchedule::default(),
                mode: Default::default(),
            },
            bank: BankConfig::default(),
            otta: OttaConfig {
                update_epochs: 30,
                ..Default::default()
            },
        }
    }

    /// Full-size run: six channels, 1024-sample windows, the 6144-input
    /// network, 10,580 events per condition and 30 online epochs.
    pub fn full_scale() -> Self {
        let mut c = Self::desk();
        c.output_dir = PathBuf::from("runs/full");
        c.window = 1024;
        c.offline_windows_per_cell = 2645;
        c.online_sequence = vec![
            SegmentSpec {
                condition: 1,
                length: 10_580,
                injection_fraction: 0.3,
                fault_label: 1,
            },
            SegmentSpec {
                condition: 2,
                length: 10_580,
                injection_fraction: 0.5,
                fault_label: 2,
            },
            SegmentSpec {
                condition: 0,
                length: 10_580,
                injection_fraction: 0.7,
                fault_label: 3,
            },
            SegmentSpec {
                condition: 3,
                length: 10_580,
                injection_fraction: 0.5,
                fault_label: 2,
            },
        ];
        c.offline_conditions = vec![0, 3];
        c.data = DataSource::Synthetic(SyntheticSpec {
            n_conditions: 4,
            n_faults: 4,
            load_levels: vec![15.0, 20.0, 30.0, 40.0],
            base_freqs_hz: vec![400.0, 600.0, 800.0, 1000.0],
            noise_sigma: 0.5,
            seed: 0,
            n_channels: 6,
            sample_rate_hz: 12_800.0,
            load_ref: 27.5,
            amp_slope: 0.012,
            freq_slope: 0.002,
        });
        let full = ArchConfig::full_scale(6144);
        c.model = ModelConfig {
            feature_hidden: full.feature_hidden,
            feature_dim: full.feature_dim,
            classifier_hidden: full.classifier_hidden,
            discriminator_hidden: full.discriminator_hidden,
        };
        c.offline.epochs = 50;
        c.otta.update_epochs = 30;
        c
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut c: Self = toml::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let DataSource::Manifest { path: p } = &mut c.data {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new("")).join(&*p);
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// `(n_conditions, n_faults, n_channels)` of the data source.
    pub fn data_shape(&self) -> Result<(usize, usize, usize)> {
        match &self.data {
            DataSource::Synthetic(s) => Ok((s.n_conditions, s.n_faults, s.n_channels)),
            DataSource::Manifest { path } => {
                let m = DatasetManifest::load(path)?;
                Ok((m.n_conditions, m.n_faults, m.csv.channels.len()))
            }
        }
    }

    pub fn input_dim(&self) -> Result<usize> {
        Ok(self.data_shape()?.2 * self.window)
    }

    /// Whether a condition was seen offline (KC) or not (UC).
    pub fn tag_of(&self, condition: usize) -> ConditionTag {
        if self.offline_conditions.contains(&condition) {
            ConditionTag::Known
        } else {
            ConditionTag::Unknown
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("at least one method is required"));
        }
        if self.window == 0 || self.step == 0 {
            return Err(Error::config("window and step must be >= 1"));
        }
        if self.offline_windows_per_cell == 0 {
            return Err(Error::config("offline_windows_per_cell must be >= 1"));
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        let (n_conditions, n_faults, _) = self.data_shape()?;
        if self.healthy_label >= n_faults {
            return Err(Error::config(format!(
                "healthy_label {} outside {n_faults} classes",
                self.healthy_label
            )));
        }
        if self.offline_conditions.is_empty() {
            return Err(Error::config("offline_conditions is empty"));
        }
        let mut seen = self.offline_conditions.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.offline_conditions.len() {
            return Err(Error::config("offline_conditions has duplicates"));
        }
        for &c in &self.offline_conditions {
            if c >= n_conditions {
                return Err(Error::config(format!("unknown offline condition {c}")));
            }
        }
        let adversarial = self.methods.iter().any(|m| *m != Method::Baseline);
        if adversarial && self.offline_conditions.len() < 2 {
            return Err(Error::config(
                "adversarial training needs at least two offline conditions",
            ));
        }
        if self.online_sequence.is_empty() {
            return Err(Error::config("online_sequence is empty"));
        }
        for (i, s) in self.online_sequence.iter().enumerate() {
            if s.condition >= n_conditions {
                return Err(Error::config(format!(
                    "segment {i}: unknown condition {}",
                    s.condition
                )));
            }
            if s.fault_label >= n_faults {
                return Err(Error::config(format!(
                    "segment {i}: unknown fault {}",
                    s.fault_label
                )));
            }
            if s.length == 0 {
                return Err(Error::config(format!("segment {i}: length must be >= 1")));
            }
            if !(s.injection_fraction > 0.0 && s.injection_fraction < 1.0) {
                return Err(Error::config(format!(
                    "segment {i}: injection_fraction must lie in (0, 1)"
                )));
            }
        }
        self.offline.validate()?;
        self.otta.validate()?;
        if self.bank.per_cell == 0 || self.bank.online_capacity == 0 {
            return Err(Error::config("bank sizes must be >= 1"));
        }
        if self.bank.seed_count() > self.bank.online_capacity {
            return Err(Error::config("bank.n_seed exceeds online_capacity"));
        }
        if self.model.feature_dim == 0 {
            return Err(Error::config("model.feature_dim must be >= 1"));
        }
        Ok(())
    }

    /// SHA-256 of the config with `output_dir` blanked, so the same
    /// experiment hashes equal wherever it is written.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Seed of trial `i`.
    pub fn trial_seed(&self, i: usize) -> u64 {
        self.base_seed.wrapping_add(i as u64)
    }
}

/// Seen-offline (KC) or unseen (UC) condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditionTag {
    #[serde(rename = "UC")]
    Unknown,
    #[serde(rename = "KC")]
    Known,
}

impl ConditionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionTag::Unknown => "UC",
            ConditionTag::Known => "KC",
        }
    }
}

impl std::fmt::Display for ConditionTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
