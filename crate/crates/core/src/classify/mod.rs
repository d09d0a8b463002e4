//! Per-modality feature extraction, one-vs-rest linear SVMs, the late-fusion
//! head with missing-modality routing, taxonomy rollup and evaluation.

mod eval;
mod features;
mod fusion;
mod svm;
mod taxonomy;

pub use eval::{evaluate, ClassMetrics, EvalReport, RankAccuracy};
pub use features::{
    featurize_image, featurize_wingbeat, FeatureVector, WingbeatFeatureConfig, SCHEMA_VERSION,
};
pub use fusion::{
    predict_any, predict_features, train_fusion, train_fusion_features, EventFeatures,
    FusionConfig, FusionInput, FusionGradients, FusionHead, FusionModel, Prediction, Route, RoutingTable,
};
pub use svm::{train_linear_svm, LinearSvmModel, Standardizer, SvmConfig};
pub use taxonomy::{rollup_classes, rollup_taxonomy, Rank, TaxonLabel, TaxonomyRollup, TaxonomyTree};

use crate::acquisition::Modality;
use crate::dsp::DspError;

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("training data contains a single class ({0})")]
    SingleClass(String),
    #[error("expected dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("expected {expected:?} features, got {found:?}")]
    ModalityMismatch { expected: Modality, found: Modality },
    #[error("event {event_id} lacks the {modality:?} modality")]
    MissingModality { event_id: String, modality: Modality },
    #[error("event has neither a wingbeat nor camera frames")]
    NoModalities,
    #[error("species {0} is not in the taxonomy")]
    UnknownSpecies(String),
    #[error("bad image descriptor: {0}")]
    BadDescriptor(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no samples")]
    Empty,
    #[error("extractor class lists differ")]
    ClassMismatch,
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
    #[error("invalid classifier config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

impl ClassifyError {
    pub fn kind(&self) -> &'static str {
        match self {
            ClassifyError::SingleClass(_) => "SingleClass",
            ClassifyError::DimensionMismatch { .. } => "DimensionMismatch",
            ClassifyError::ModalityMismatch { .. } => "ModalityMismatch",
            ClassifyError::MissingModality { .. } => "MissingModality",
            ClassifyError::NoModalities => "NoModalities",
            ClassifyError::UnknownSpecies(_) => "UnknownSpecies",
            ClassifyError::BadDescriptor(_) => "BadDescriptor",
            ClassifyError::LengthMismatch(..) => "LengthMismatch",
            ClassifyError::Empty => "Empty",
            ClassifyError::ClassMismatch => "ClassMismatch",
            ClassifyError::InvalidTaxonomy(_) => "InvalidTaxonomy",
            ClassifyError::InvalidConfig(_) => "InvalidConfig",
            ClassifyError::Dsp(e) => e.kind(),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / scores.len() as f64; scores.len()];
    }
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
