//! Welch power spectral density and short-time spectrograms.
//!
//! Both estimators share [`periodogram`], a one-sided density scaled so that
//! `sum(psd) * resolution` equals the (window-weighted) variance of the
//! segment.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{DspError, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Rect,
}

impl Window {
    /// Periodic window coefficients of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos()))
                .collect(),
        }
    }
}

/// Per-segment trend removal applied before windowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Detrend {
    None,
    #[default]
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WelchConfig {
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub window: Window,
    pub detrend: Detrend,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_len: 8192,
            overlap_fraction: 0.5,
            window: Window::Hann,
            detrend: Detrend::Constant,
        }
    }
}

impl WelchConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.segment_len < 16 {
            return Err(DspError::SegmentTooShort(self.segment_len));
        }
        if !(0.0..=0.9).contains(&self.overlap_fraction) {
            return Err(DspError::InvalidOverlap(self.overlap_fraction));
        }
        Ok(())
    }

    /// Samples between successive segment starts.
    pub fn step(&self) -> usize {
        let overlap = (self.overlap_fraction * self.segment_len as f64).floor() as usize;
        (self.segment_len - overlap).max(1)
    }
}

/// One-sided power spectral density on a uniform grid starting at 0 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    frequencies: Vec<f64>,
    psd: Vec<f64>,
    resolution: f64,
}

impl PowerSpectrum {
    /// Builds a spectrum on the grid `k * resolution`, `k = 0..psd.len()`.
    pub fn from_uniform(resolution: f64, psd: Vec<f64>) -> Result<Self, DspError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(DspError::InvalidSpectrum("resolution must be positive"));
        }
        if psd.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(DspError::InvalidSpectrum("psd values must be finite and >= 0"));
        }
        let frequencies = (0..psd.len()).map(|k| k as f64 * resolution).collect();
        Ok(Self {
            frequencies,
            psd,
            resolution,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn psd(&self) -> &[f64] {
        &self.psd
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty()
    }

    /// Highest frequency on the grid.
    pub fn max_frequency(&self) -> f64 {
        self.frequencies.last().copied().unwrap_or(0.0)
    }

    /// Integrated power, `sum(psd) * resolution`.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution
    }

    /// Linear interpolation of the density at `freq_hz`, clamped to the grid.
    pub fn density_at(&self, freq_hz: f64) -> f64 {
        if self.psd.is_empty() {
            return 0.0;
        }
        let pos = (freq_hz / self.resolution).max(0.0);
        let lo = pos.floor() as usize;
        if lo + 1 >= self.psd.len() {
            return *self.psd.last().unwrap();
        }
        let frac = pos - lo as f64;
        self.psd[lo] * (1.0 - frac) + self.psd[lo + 1] * frac
    }
}

/// Time-frequency power matrix, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub times: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub power: Vec<Vec<f64>>,
}

impl Spectrogram {
    /// Frequency of the strongest bin in every frame.
    pub fn peak_frequencies(&self) -> Vec<f64> {
        self.power
            .iter()
            .map(|row| self.frequencies[argmax(row)])
            .collect()
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

struct SegmentTransform {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    scale: f64,
    detrend: Detrend,
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl SegmentTransform {
    fn new(len: usize, window: Window, detrend: Detrend, sample_rate: f64) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        let window = window.coefficients(len);
        let window_energy: f64 = window.iter().map(|w| w * w).sum();
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self {
            fft,
            scale: 1.0 / (sample_rate * window_energy),
            window,
            detrend,
            buffer: vec![Complex::default(); len],
            scratch,
        }
    }

    /// Adds the one-sided periodogram of `segment` into `acc`.
    fn accumulate(&mut self, segment: &[f64], acc: &mut [f64]) {
        let n = segment.len();
        let offset = match self.detrend {
            Detrend::None => 0.0,
            Detrend::Constant => segment.iter().sum::<f64>() / n as f64,
        };
        for ((slot, x), w) in self.buffer.iter_mut().zip(segment).zip(&self.window) {
            *slot = Complex::new((x - offset) * w, 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        let bins = n / 2 + 1;
        for (k, a) in acc.iter_mut().enumerate().take(bins) {
            let mut p = self.buffer[k].norm_sqr() * self.scale;
            let nyquist_bin = n % 2 == 0 && k == n / 2;
            if k != 0 && !nyquist_bin {
                p *= 2.0;
            }
            *a += p;
        }
    }
}

/// One-sided periodogram of a single segment.
pub fn periodogram(
    segment: &[f64],
    sample_rate: f64,
    window: Window,
    detrend: Detrend,
) -> Result<PowerSpectrum, DspError> {
    if segment.is_empty() {
        return Err(DspError::EmptySignal);
    }
    let mut psd = vec![0.0; segment.len() / 2 + 1];
    SegmentTransform::new(segment.len(), window, detrend, sample_rate).accumulate(segment, &mut psd);
    PowerSpectrum::from_uniform(sample_rate / segment.len() as f64, psd)
}

/// Welch's averaged-periodogram PSD estimate over `[0, Nyquist]`.
pub fn welch_psd(signal: &TimeSeries, config: &WelchConfig) -> Result<PowerSpectrum, DspError> {
    config.validate()?;
    let samples = signal.samples();
    if samples.is_empty() {
        return Err(DspError::EmptySignal);
    }
    let seg = config.segment_len;
    if seg > samples.len() {
        return Err(DspError::SegmentTooLong {
            segment_len: seg,
            signal_len: samples.len(),
        });
    }
    let step = config.step();
    let count = (samples.len() - seg) / step + 1;
    let mut transform = SegmentTransform::new(seg, config.window, config.detrend, signal.sample_rate());
    let mut psd = vec![0.0; seg / 2 + 1];
    for i in 0..count {
        transform.accumulate(&samples[i * step..i * step + seg], &mut psd);
    }
    for p in psd.iter_mut() {
        *p /= count as f64;
    }
    PowerSpectrum::from_uniform(signal.sample_rate() / seg as f64, psd)
}

/// Short-time spectrogram; every frame is the periodogram of its slice.
pub fn stft_spectrogram(
    signal: &TimeSeries,
    segment_len: usize,
    hop: usize,
    window: Window,
) -> Result<Spectrogram, DspError> {
    if hop == 0 {
        return Err(DspError::InvalidHop);
    }
    let samples = signal.samples();
    if samples.is_empty() {
        return Err(DspError::EmptySignal);
    }
    if segment_len == 0 {
        return Err(DspError::SegmentTooShort(segment_len));
    }
    if segment_len > samples.len() {
        return Err(DspError::SegmentTooLong {
            segment_len,
            signal_len: samples.len(),
        });
    }
    let fs = signal.sample_rate();
    let frames = (samples.len() - segment_len) / hop + 1;
    let bins = segment_len / 2 + 1;
    let mut transform = SegmentTransform::new(segment_len, window, Detrend::Constant, fs);
    let mut times = Vec::with_capacity(frames);
    let mut power = Vec::with_capacity(frames);
    for i in 0..frames {
        let start = i * hop;
        let mut row = vec![0.0; bins];
        transform.accumulate(&samples[start..start + segment_len], &mut row);
        power.push(row);
        times.push(signal.start_time() + (start as f64 + segment_len as f64 / 2.0) / fs);
    }
    let resolution = fs / segment_len as f64;
    Ok(Spectrogram {
        times,
        frequencies: (0..bins).map(|k| k as f64 * resolution).collect(),
        power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct O(N^2) DFT periodogram, independent of rustfft.
    fn dft_periodogram(x: &[f64], fs: f64, window: Window, detrend: bool) -> Vec<f64> {
        let n = x.len();
        let w = window.coefficients(n);
        let mean = if detrend {
            x.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let energy: f64 = w.iter().map(|v| v * v).sum();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, (xv, wv)) in x.iter().zip(&w).enumerate() {
                    let ang = -2.0 * PI * (k * t % n) as f64 / n as f64;
                    re += (xv - mean) * wv * ang.cos();
                    im += (xv - mean) * wv * ang.sin();
                }
                let edge = k == 0 || (n % 2 == 0 && k == n / 2);
                let factor = if edge { 1.0 } else { 2.0 };
                factor * (re * re + im * im) / (fs * energy)
            })
            .collect()
    }

    fn tone(freq: f64, fs: f64, n: usize) -> TimeSeries {
        let s = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect();
        TimeSeries::new(s, fs, 0.0).unwrap()
    }

    #[test]
    fn tone_peak_bin() {
        let sig = tone(350.0, 96_000.0, 96_000);
        let psd = welch_psd(&sig, &WelchConfig::default()).unwrap();
        assert!((psd.resolution() - 11.71875).abs() < 1e-12);
        let peak = argmax(psd.psd());
        assert_eq!(peak, 30);
        assert!((psd.frequencies()[peak] - 351.5625).abs() < 1e-9);

        // one-segment brute-force oracle agrees on the peak bin
        let oracle = dft_periodogram(&sig.samples()[..8192], 96_000.0, Window::Hann, true);
        assert_eq!(argmax(&oracle), 30);
    }

    #[test]
    fn zero_signal_zero_psd() {
        let sig = TimeSeries::new(vec![0.0; 4096], 1000.0, 0.0).unwrap();
        let cfg = WelchConfig {
            segment_len: 256,
            ..Default::default()
        };
        assert!(welch_psd(&sig, &cfg).unwrap().psd().iter().all(|p| *p == 0.0));
    }

    #[test]
    fn white_noise_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s: Vec<f64> = (0..50_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sig = TimeSeries::new(s, 8000.0, 0.0).unwrap();
        let cfg = WelchConfig {
            segment_len: 1024,
            ..Default::default()
        };
        let psd = welch_psd(&sig, &cfg).unwrap();
        let rel = (psd.total_power() - sig.variance()).abs() / sig.variance();
        assert!(rel < 0.05, "{rel}");
    }

    #[test]
    fn single_rect_segment_matches_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..250).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sig = TimeSeries::new(s.clone(), 500.0, 0.0).unwrap();
        let cfg = WelchConfig {
            segment_len: 250,
            overlap_fraction: 0.0,
            window: Window::Rect,
            detrend: Detrend::None,
        };
        let psd = welch_psd(&sig, &cfg).unwrap();
        let oracle = dft_periodogram(&s, 500.0, Window::Rect, false);
        let scale = oracle.iter().cloned().fold(0.0, f64::max);
        for (a, b) in psd.psd().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn argument_errors() {
        let sig = tone(10.0, 100.0, 100);
        let long = WelchConfig {
            segment_len: 128,
            ..Default::default()
        };
        assert!(matches!(
            welch_psd(&sig, &long),
            Err(DspError::SegmentTooLong { .. })
        ));
        let overlap = WelchConfig {
            segment_len: 32,
            overlap_fraction: 0.95,
            ..Default::default()
        };
        assert!(matches!(
            welch_psd(&sig, &overlap),
            Err(DspError::InvalidOverlap(_))
        ));
        let short = WelchConfig {
            segment_len: 8,
            ..Default::default()
        };
        assert!(matches!(
            welch_psd(&sig, &short),
            Err(DspError::SegmentTooShort(8))
        ));
        assert!(matches!(
            stft_spectrogram(&sig, 32, 0, Window::Hann),
            Err(DspError::InvalidHop)
        ));
        assert!(matches!(
            stft_spectrogram(&sig, 200, 10, Window::Hann),
            Err(DspError::SegmentTooLong { .. })
        ));
    }

    #[test]
    fn chirp_tracks_upwards() {
        let fs = 96_000.0;
        let (f0, f1) = (200.0, 600.0);
        let s: Vec<f64> = (0..96_000)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * (f0 * t + 0.5 * (f1 - f0) * t * t)).sin()
            })
            .collect();
        let sig = TimeSeries::new(s, fs, 0.0).unwrap();
        let spec = stft_spectrogram(&sig, 4096, 2048, Window::Hann).unwrap();
        assert_eq!(spec.times.len(), (96_000 - 4096) / 2048 + 1);
        let peaks = spec.peak_frequencies();
        let bin = fs / 4096.0;
        assert!(peaks.windows(2).all(|w| w[1] >= w[0]));
        assert!((peaks[0] - f0).abs() <= 2.0 * bin);
        assert!((peaks.last().unwrap() - f1).abs() <= 2.0 * bin);
        // instantaneous frequency at each frame centre is within one bin
        for (t, p) in spec.times.iter().zip(&peaks) {
            let inst = f0 + (f1 - f0) * t;
            assert!((p - inst).abs() <= bin, "t={t} peak={p} inst={inst}");
        }
    }

    #[test]
    fn stationary_tone_same_bin() {
        let sig = tone(300.0, 8000.0, 8000);
        let spec = stft_spectrogram(&sig, 512, 128, Window::Hann).unwrap();
        let peaks = spec.peak_frequencies();
        assert!(peaks.iter().all(|p| *p == peaks[0]));
    }

    #[test]
    fn disjoint_rect_frames_are_chunk_periodograms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s: Vec<f64> = (0..640).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sig = TimeSeries::new(s.clone(), 1000.0, 0.0).unwrap();
        let spec = stft_spectrogram(&sig, 128, 128, Window::Rect).unwrap();
        assert_eq!(spec.power.len(), 5);
        for (i, row) in spec.power.iter().enumerate() {
            let oracle = dft_periodogram(&s[i * 128..(i + 1) * 128], 1000.0, Window::Rect, true);
            for (a, b) in row.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn rect_full_segment_parseval(
                x in proptest::collection::vec(-1.0f64..1.0, 16..300),
            ) {
                let n = x.len();
                let sig = TimeSeries::new(x, 1000.0, 0.0).unwrap();
                let cfg = WelchConfig {
                    segment_len: n,
                    overlap_fraction: 0.0,
                    window: Window::Rect,
                    detrend: Detrend::Constant,
                };
                let psd = welch_psd(&sig, &cfg).unwrap();
                let var = sig.variance();
                prop_assume!(var > 1e-6);
                prop_assert!((psd.total_power() - var).abs() <= 1e-6 * var);
                prop_assert!(psd.psd().iter().all(|p| *p >= 0.0));
            }

            #[test]
            fn stft_frame_is_single_segment_welch(
                x in proptest::collection::vec(-1.0f64..1.0, 64..400),
                hop in 1usize..50,
            ) {
                let sig = TimeSeries::new(x.clone(), 2000.0, 0.0).unwrap();
                let spec = stft_spectrogram(&sig, 32, hop, Window::Hann).unwrap();
                prop_assert_eq!(spec.power.len(), (x.len() - 32) / hop + 1);
                let t = spec.power.len() / 2;
                let slice = sig.with_samples(x[t * hop..t * hop + 32].to_vec());
                let cfg = WelchConfig { segment_len: 32, overlap_fraction: 0.0, ..Default::default() };
                let welch = welch_psd(&slice, &cfg).unwrap();
                for (a, b) in spec.power[t].iter().zip(welch.psd()) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }
    }
}
