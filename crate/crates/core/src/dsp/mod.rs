//! Wingbeat signal chain: DC removal, high-pass filtering, Welch PSD,
//! STFT spectrograms, fundamental/harmonic extraction and sensor sizing.

mod filter;
mod geometry;
mod harmonics;
mod series;
mod spectral;
pub mod wav;

pub use filter::{highpass_filter, HighpassFilter};
pub use geometry::{expected_beats_in_path, SensorGeometry};
pub use harmonics::{extract_harmonics, Harmonic, HarmonicConfig, HarmonicProfile};
pub use series::{remove_dc, TimeSeries, NOMINAL_SAMPLE_RATE};
pub use spectral::{
    periodogram, stft_spectrogram, welch_psd, Detrend, PowerSpectrum, Spectrogram, WelchConfig,
    Window,
};

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("signal has no samples")]
    EmptySignal,
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("start time must be non-negative and finite, got {0}")]
    InvalidStartTime(f64),
    #[error("cutoff {cutoff_hz} Hz outside (0, {nyquist_hz}) Hz")]
    InvalidCutoff { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("filter order must be at least 1")]
    InvalidOrder,
    #[error("segment length {segment_len} exceeds signal length {signal_len}")]
    SegmentTooLong { segment_len: usize, signal_len: usize },
    #[error("segment length {0} below the minimum of 16 samples")]
    SegmentTooShort(usize),
    #[error("overlap fraction {0} outside [0, 0.9]")]
    InvalidOverlap(f64),
    #[error("hop must be at least one sample")]
    InvalidHop,
    #[error("no spectral peak in band {low_hz}..{high_hz} Hz")]
    NoPeak { low_hz: f64, high_hz: f64 },
    #[error("invalid frequency band {low_hz}..{high_hz} Hz")]
    InvalidBand { low_hz: f64, high_hz: f64 },
    #[error("spectrum axes are inconsistent: {0}")]
    InvalidSpectrum(&'static str),
    #[error("flight speed must be positive, got {0} m/s")]
    ZeroSpeed(f64),
    #[error("wingbeat frequency must be non-negative, got {0} Hz")]
    NegativeFrequency(f64),
    #[error("invalid sensor geometry: {0}")]
    InvalidGeometry(&'static str),
    #[error("expected a mono WAV file, found {0} channels")]
    MultiChannel(u16),
    #[error("unsupported WAV format: {0}")]
    UnsupportedWav(String),
    #[error("WAV I/O failed: {0}")]
    Wav(#[from] hound::Error),
}

impl DspError {
    pub fn kind(&self) -> &'static str {
        match self {
            DspError::EmptySignal => "EmptySignal",
            DspError::InvalidSampleRate(_) => "InvalidSampleRate",
            DspError::InvalidStartTime(_) => "InvalidStartTime",
            DspError::InvalidCutoff { .. } => "InvalidCutoff",
            DspError::InvalidOrder => "InvalidOrder",
            DspError::SegmentTooLong { .. } => "SegmentTooLong",
            DspError::SegmentTooShort(_) => "SegmentTooShort",
            DspError::InvalidOverlap(_) => "InvalidOverlap",
            DspError::InvalidHop => "InvalidHop",
            DspError::NoPeak { .. } => "NoPeak",
            DspError::InvalidBand { .. } => "InvalidBand",
            DspError::InvalidSpectrum(_) => "InvalidSpectrum",
            DspError::ZeroSpeed(_) => "ZeroSpeed",
            DspError::NegativeFrequency(_) => "NegativeFrequency",
            DspError::InvalidGeometry(_) => "InvalidGeometry",
            DspError::MultiChannel(_) => "MultiChannel",
            DspError::UnsupportedWav(_) => "UnsupportedWav",
            DspError::Wav(_) => "Wav",
        }
    }
}
