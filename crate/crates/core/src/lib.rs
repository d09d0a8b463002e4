//! Insect identification from optoacoustic wingbeat recordings and strobed
//! camera frames.
//!
//! * [`dsp`]: Welch PSD, STFT, high-pass filtering and harmonic extraction.
//! * [`acquisition`]: simulated light-barrier trigger, strobed camera ring
//!   buffer and co-registration into detection events.
//! * [`env`]: environmental activity priors.
//! * [`classify`]: features, linear SVMs, the late-fusion head, taxonomy
//!   rollup and evaluation.
//! * [`dataset`]: manifests, synthetic data sets, model files and the
//!   train/evaluate pipeline.

// Validation uses `!(x > 0.0)` so that NaN is rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod classify;
pub mod dataset;
pub mod dsp;
pub mod env;
mod error;

pub use acquisition::{DetectionEvent, Frame, Modality};
pub use classify::{EvalReport, FeatureVector, FusionModel, LinearSvmModel, TaxonLabel, TaxonomyTree};
pub use dsp::{PowerSpectrum, Spectrogram, TimeSeries};
pub use env::EnvSnapshot;
pub use error::{Error, Result};
