//! Simulated acquisition chain: light-barrier trigger, strobed camera with a
//! ring buffer of frames, brightness-based frame selection and timestamp
//! co-registration of the modalities into detection events.

mod event;
mod frames;
mod simulate;
mod trigger;

pub use event::{co_register, event_id_for, DetectionEvent, Modality};
pub use frames::{select_frames, Frame, RingBuffer};
pub use simulate::{simulate_transit, Appearance, SimulationConfig, Transit, TransitScenario};
pub use trigger::{run_trigger, TriggerConfig};

use crate::dsp::DspError;

#[derive(Debug, thiserror::Error)]
pub enum AcquisitionError {
    #[error("beam sample {index} = {value} outside [0, 1]")]
    InvalidBeamRange { index: usize, value: f64 },
    #[error("only {found} frames in the selection window, {needed} required")]
    InsufficientFrames { found: usize, needed: usize },
    #[error("sample rate {sample_rate} Hz cannot represent {orders} harmonics of {wingbeat_hz} Hz")]
    AliasedScenario {
        sample_rate: f64,
        wingbeat_hz: f64,
        orders: usize,
    },
    #[error("invalid transit scenario: {0}")]
    InvalidScenario(&'static str),
    #[error("invalid acquisition config: {0}")]
    InvalidConfig(&'static str),
    #[error("frame at {timestamp} s does not follow the newest buffered frame")]
    NonMonotonicFrame { timestamp: f64 },
    #[error("event has no modality inside the co-registration window")]
    NoModalities,
    #[error(transparent)]
    Dsp(#[from] DspError),
}

impl AcquisitionError {
    pub fn kind(&self) -> &'static str {
        match self {
            AcquisitionError::InvalidBeamRange { .. } => "InvalidBeamRange",
            AcquisitionError::InsufficientFrames { .. } => "InsufficientFrames",
            AcquisitionError::AliasedScenario { .. } => "AliasedScenario",
            AcquisitionError::InvalidScenario(_) => "InvalidScenario",
            AcquisitionError::InvalidConfig(_) => "InvalidConfig",
            AcquisitionError::NonMonotonicFrame { .. } => "NonMonotonicFrame",
            AcquisitionError::NoModalities => "NoModalities",
            AcquisitionError::Dsp(e) => e.kind(),
        }
    }
}
