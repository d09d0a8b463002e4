//! Manifests, synthetic data sets, embedding import, model files, run
//! configuration and the end-to-end train/evaluate pipeline.

mod config;
mod embeddings;
mod manifest;
mod model_io;
mod pipeline;
mod synth;

pub use config::{EvalConfig, PriorConfig, RunConfig, SplitSelection};
pub use embeddings::{load_embeddings, write_embeddings_csv};
pub use manifest::{load_manifest, DatasetManifest, ManifestRecord, ParseKind, Split};
pub use model_io::{load_model, save_model, Model, ModelFile, MODEL_FORMAT_VERSION};
pub use pipeline::{
    compare_modalities, evaluate_model, featurize_manifest, featurize_synthetic, stratified_split,
    train_model, write_feature_table, Evaluation, LabelledEvent, ModalityComparison,
};
pub use synth::{synth_dataset, synth_events, SpeciesProfile, SynthEvent, SynthSpec};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {kind:?}: {message}")]
    Parse {
        line: usize,
        kind: ParseKind,
        message: String,
    },
    #[error("missing files: {0:?}")]
    MissingFile(Vec<PathBuf>),
    #[error("synthesis spec lists no species")]
    EmptySpec,
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("unsupported model file: {0}")]
    ModelFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DatasetError {
    pub fn kind(&self) -> &'static str {
        match self {
            DatasetError::Parse { .. } => "ParseError",
            DatasetError::MissingFile(_) => "MissingFile",
            DatasetError::EmptySpec => "EmptySpec",
            DatasetError::InvalidSpec(_) => "InvalidSpec",
            DatasetError::Config(_) => "ConfigError",
            DatasetError::ModelFormat(_) => "ModelFormat",
            DatasetError::Io { .. } => "IoError",
            DatasetError::Json(_) => "ParseError",
            DatasetError::Csv(_) => "ParseError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| DatasetError::Io { path, source }
    }
}
