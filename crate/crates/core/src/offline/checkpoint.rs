use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::DannModel;
use crate::datagen::Standardizer;
use crate::error::{Error, Result};
use crate::nncore::{MlpNetwork, Real};

pub const MODEL_FORMAT_VERSION: u32 = 1;

const FEATURE_FILE: &str = "feature.bin";
const FAULT_FILE: &str = "fault_head.bin";
const CONDITION_FILE: &str = "condition_head.bin";
const NORM_FILE: &str = "standardizer.bin";
const MANIFEST_FILE: &str = "model.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub n_faults: usize,
    pub n_conditions: usize,
    pub input_dim: usize,
    pub feature_dim: usize,
    pub float_width: u8,
    pub config_hash: String,
    pub param_digest: String,
}

/// Writes the three networks, the frozen standardizer and a JSON manifest to `dir`.
pub fn save_checkpoint<T: Real>(
    dir: &Path,
    model: &DannModel<T>,
    standardizer: &Standardizer,
    config_hash: &str,
) -> Result<ModelManifest> {
    std::fs::create_dir_all(dir)?;
    model.feature.save(&dir.join(FEATURE_FILE))?;
    model.fault_head.save(&dir.join(FAULT_FILE))?;
    model.condition_head.save(&dir.join(CONDITION_FILE))?;
    let mut w = BufWriter::new(File::create(dir.join(NORM_FILE))?);
    standardizer.write_to(&mut w)?;
    w.flush()?;
    let manifest = ModelManifest {
        format_version: MODEL_FORMAT_VERSION,
        n_faults: model.n_faults(),
        n_conditions: model.n_conditions(),
        input_dim: model.input_dim(),
        feature_dim: model.feature.output_dim(),
        float_width: T::WIDTH,
        config_hash: config_hash.to_string(),
        param_digest: model.param_digest(),
    };
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn load_checkpoint<T: Real>(dir: &Path) -> Result<(DannModel<T>, Standardizer, ModelManifest)> {
    let manifest: ModelManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Format {
            path: dir.join(MANIFEST_FILE),
            message: format!("unsupported model format {}", manifest.format_version),
        });
    }
    let model = DannModel::from_parts(
        MlpNetwork::load(&dir.join(FEATURE_FILE))?,
        MlpNetwork::load(&dir.join(FAULT_FILE))?,
        MlpNetwork::load(&dir.join(CONDITION_FILE))?,
    )?;
    let standardizer =
        Standardizer::read_from(&mut BufReader::new(File::open(dir.join(NORM_FILE))?))?;
    if model.param_digest() != manifest.param_digest {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            message: "parameter digest does not match manifest".into(),
        });
    }
    Ok((model, standardizer, manifest))
}
