//! Crate-level error type.
//!
//! Each module owns a focused error enum; [`Error`] wraps them so pipeline
//! code can use `?` across module boundaries. [`Error::kind`] yields a stable
//! machine-readable code for every variant.

use crate::acquisition::AcquisitionError;
use crate::classify::ClassifyError;
use crate::dataset::DatasetError;
use crate::dsp::DspError;
use crate::env::EnvError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dsp(e) => e.kind(),
            Error::Acquisition(e) => e.kind(),
            Error::Env(e) => e.kind(),
            Error::Classify(e) => e.kind(),
            Error::Dataset(e) => e.kind(),
        }
    }
}
