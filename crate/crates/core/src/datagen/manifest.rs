use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ingest_csv, CsvSchema, SignalRecord};
use crate::error::{Error, Result};

/// Which phase a recording feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSplit {
    Offline,
    Online,
    /// First half of the windows go offline, second half online.
    #[default]
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: PathBuf,
    pub condition: usize,
    pub fault: usize,
    #[serde(default)]
    pub split: RecordSplit,
}

/// TOML file mapping CSV recordings to `(condition, fault)` labels.
///
/// ```toml
/// n_conditions = 4
/// n_faults = 4
///
/// [csv]
/// channels = ["ax", "ay", "az", "ia", "ib", "ic"]
/// sample_rate_hz = 12800.0
///
/// [[records]]
/// path = "c0_f0.csv"
/// condition = 0
/// fault = 0
/// split = "offline"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n_conditions: usize,
    pub n_faults: usize,
    pub csv: CsvSchema,
    pub records: Vec<ManifestRecord>,
    /// Directory relative paths are resolved against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut m: DatasetManifest = toml::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            if r.condition >= self.n_conditions {
                return Err(Error::Index {
                    what: "manifest condition",
                    index: r.condition,
                    limit: self.n_conditions,
                });
            }
            if r.fault >= self.n_faults {
                return Err(Error::Index {
                    what: "manifest fault",
                    index: r.fault,
                    limit: self.n_faults,
                });
            }
        }
        Ok(())
    }

    pub fn resolve(&self, rec: &ManifestRecord) -> PathBuf {
        if rec.path.is_absolute() {
            rec.path.clone()
        } else {
            self.base_dir.join(&rec.path)
        }
    }

    /// Records usable for `split`, in manifest order.
    pub fn records_for(
        &self,
        condition: usize,
        fault: usize,
        split: RecordSplit,
    ) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| {
            r.condition == condition
                && r.fault == fault
                && (r.split == split || r.split == RecordSplit::Any)
        })
    }

    pub fn load_record(&self, rec: &ManifestRecord) -> Result<SignalRecord> {
        ingest_csv(&self.resolve(rec), &self.csv, rec.condition, rec.fault)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        std::fs::write(
            &path,
            r#"
n_conditions = 2
n_faults = 2
[csv]
channels = ["a"]
sample_rate_hz = 100.0
[[records]]
path = "x.csv"
condition = 1
fault = 0
split = "online"
[[records]]
path = "y.csv"
condition = 1
fault = 0
"#,
        )
        .unwrap();
        let m = DatasetManifest::load(&path).unwrap();
        assert_eq!(m.resolve(&m.records[0]), dir.path().join("x.csv"));
        assert_eq!(m.records[1].split, RecordSplit::Any);
        assert_eq!(m.records_for(1, 0, RecordSplit::Offline).count(), 1);
        assert_eq!(m.records_for(1, 0, RecordSplit::Online).count(), 2);

        std::fs::write(
            &path,
            "n_conditions = 1\nn_faults = 1\n[csv]\nchannels=[\"a\"]\nsample_rate_hz=1.0\n[[records]]\npath=\"x\"\ncondition=3\nfault=0\n",
        )
        .unwrap();
        assert!(matches!(
            DatasetManifest::load(&path),
            Err(Error::Index { .. })
        ));
    }
}
