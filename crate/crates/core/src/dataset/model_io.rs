use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::classify::{FusionModel, LinearSvmModel, TaxonomyTree, WingbeatFeatureConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum Model {
    Wingbeat(LinearSvmModel),
    Image(LinearSvmModel),
    Fusion(FusionModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Wingbeat(_) => "wingbeat",
            Model::Image(_) => "image",
            Model::Fusion(_) => "fusion",
        }
    }

    pub fn classes(&self) -> &[String] {
        match self {
            Model::Wingbeat(m) | Model::Image(m) => &m.classes,
            Model::Fusion(m) => &m.classes,
        }
    }
}

/// Versioned on-disk model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub taxonomy: TaxonomyTree,
    /// Settings used to featurize wingbeat segments for this model.
    pub features: WingbeatFeatureConfig,
    pub image_dim: usize,
    pub model: Model,
}

pub fn save_model(path: impl AsRef<Path>, model: &ModelFile) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(model)?;
    text.push('\n');
    std::fs::write(path, text).map_err(DatasetError::io(path))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(DatasetError::io(path))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
        Some(v) => return Err(DatasetError::ModelFormat(format!("format_version {v} is not supported"))),
        None => return Err(DatasetError::ModelFormat("no format_version".into())),
    }
    Ok(serde_json::from_value(value)?)
}
