use super::DspError;

/// Nominal sample rate of the wingbeat sound card, in Hz.
pub const NOMINAL_SAMPLE_RATE: f64 = 96_000.0;

/// A uniformly sampled photodiode waveform.
///
/// Samples are dimensionless floating values; PCM input is normalized by its
/// full-scale value so that magnitudes stay within `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate: f64,
    start_time: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate: f64, start_time: f64) -> Result<Self, DspError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(DspError::InvalidSampleRate(sample_rate));
        }
        if !(start_time.is_finite() && start_time >= 0.0) {
            return Err(DspError::InvalidStartTime(start_time));
        }
        Ok(Self {
            samples,
            sample_rate,
            start_time,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Length of the recording in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Timestamp of the last sample.
    pub fn end_time(&self) -> f64 {
        self.start_time + self.samples.len().saturating_sub(1) as f64 / self.sample_rate
    }

    /// Timestamp of sample `index`.
    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    /// True when every sample lies within full scale.
    pub fn is_normalized(&self) -> bool {
        self.samples.iter().all(|s| s.abs() <= 1.0 + 1e-9)
    }

    /// New series with the same timing and different samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
            start_time: self.start_time,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Population variance of the samples.
    pub fn variance(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let mean = self.mean();
        self.samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / self.samples.len() as f64
    }
}

/// Subtracts the mean so that the DC level of the body shadow disappears.
pub fn remove_dc(signal: &TimeSeries) -> Result<TimeSeries, DspError> {
    if signal.is_empty() {
        return Err(DspError::EmptySignal);
    }
    let mean = signal.mean();
    Ok(signal.with_samples(signal.samples.iter().map(|s| s - mean).collect()))
}
