use std::f64::consts::PI;

use super::{DspError, TimeSeries};

/// High-pass built from identical first-order bilinear-transform sections.
///
/// Each section is `H(s) = s / (s + a)` mapped to `z` with frequency
/// prewarping. For `order > 1` the section corner is lowered so that the
/// cascade still sits at -3 dB exactly at `cutoff_hz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighpassFilter {
    cutoff_hz: f64,
    sample_rate: f64,
    order: usize,
    // warped corner of one section
    section_corner: f64,
    b0: f64,
    a1: f64,
}

impl HighpassFilter {
    pub fn new(cutoff_hz: f64, sample_rate: f64, order: usize) -> Result<Self, DspError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(DspError::InvalidSampleRate(sample_rate));
        }
        let nyquist_hz = sample_rate / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist_hz) {
            return Err(DspError::InvalidCutoff {
                cutoff_hz,
                nyquist_hz,
            });
        }
        if order == 0 {
            return Err(DspError::InvalidOrder);
        }
        let warped = (PI * cutoff_hz / sample_rate).tan();
        let section_corner = warped * (2f64.powf(1.0 / order as f64) - 1.0).sqrt();
        Ok(Self {
            cutoff_hz,
            sample_rate,
            order,
            section_corner,
            b0: 1.0 / (1.0 + section_corner),
            a1: (section_corner - 1.0) / (section_corner + 1.0),
        })
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Analytic magnitude of the frequency response at `freq_hz`.
    pub fn magnitude_response(&self, freq_hz: f64) -> f64 {
        let f = freq_hz.abs().min(self.sample_rate / 2.0);
        if f >= self.sample_rate / 2.0 {
            return 1.0;
        }
        let w = (PI * f / self.sample_rate).tan();
        let section = w / (w * w + self.section_corner * self.section_corner).sqrt();
        section.powi(self.order as i32)
    }

    /// Runs the cascade over `samples` starting from a zero state.
    pub fn apply_slice(&self, samples: &[f64]) -> Vec<f64> {
        let mut out = samples.to_vec();
        for _ in 0..self.order {
            let mut prev_x = 0.0;
            let mut prev_y = 0.0;
            for v in out.iter_mut() {
                let x = *v;
                let y = self.b0 * (x - prev_x) - self.a1 * prev_y;
                prev_x = x;
                prev_y = y;
                *v = y;
            }
        }
        out
    }

    pub fn apply(&self, signal: &TimeSeries) -> Result<TimeSeries, DspError> {
        if (signal.sample_rate() - self.sample_rate).abs() > 1e-9 * self.sample_rate {
            return Err(DspError::InvalidSampleRate(signal.sample_rate()));
        }
        Ok(signal.with_samples(self.apply_slice(signal.samples())))
    }
}

/// First-order high-pass with its -3 dB point at `cutoff_hz`.
pub fn highpass_filter(signal: &TimeSeries, cutoff_hz: f64) -> Result<TimeSeries, DspError> {
    HighpassFilter::new(cutoff_hz, signal.sample_rate(), 1)?.apply(signal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, seconds: f64) -> Vec<f64> {
        let n = (fs * seconds) as usize;
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    /// Amplitude of the `freq` component over the last `cycles` whole periods.
    fn tail_amplitude(x: &[f64], freq: f64, fs: f64, cycles: usize) -> f64 {
        let n = (cycles as f64 * fs / freq).round() as usize;
        let tail = &x[x.len() - n..];
        let offset = x.len() - n;
        let (mut s, mut c) = (0.0, 0.0);
        for (i, v) in tail.iter().enumerate() {
            let ph = 2.0 * PI * freq * (i + offset) as f64 / fs;
            s += v * ph.sin();
            c += v * ph.cos();
        }
        2.0 * (s * s + c * c).sqrt() / n as f64
    }

    #[test]
    fn dc_is_removed() {
        let fs = 96_000.0;
        let s = TimeSeries::new(vec![1.0; 2 * 96_000], fs, 0.0).unwrap();
        let out = highpass_filter(&s, 8.0).unwrap();
        assert!(out.samples().last().unwrap().abs() < 0.01);
    }

    #[test]
    fn cutoff_is_half_power() {
        let fs = 96_000.0;
        let s = TimeSeries::new(sine(8.0, fs, 4.0), fs, 0.0).unwrap();
        let out = highpass_filter(&s, 8.0).unwrap();
        let ratio = tail_amplitude(out.samples(), 8.0, fs, 8);
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn passband_is_flat() {
        let fs = 96_000.0;
        let s = TimeSeries::new(sine(800.0, fs, 1.0), fs, 0.0).unwrap();
        let out = highpass_filter(&s, 8.0).unwrap();
        let ratio = tail_amplitude(out.samples(), 800.0, fs, 100);
        assert!(ratio >= 0.9999 - 1e-3, "ratio {ratio}");
    }

    #[test]
    fn analytic_response_matches_design() {
        for order in 1..=4 {
            let f = HighpassFilter::new(8.0, 96_000.0, order).unwrap();
            assert!((f.magnitude_response(8.0) - 0.5f64.sqrt()).abs() < 1e-12);
            assert_eq!(f.magnitude_response(0.0), 0.0);
            assert!(f.magnitude_response(800.0) > 0.999);
        }
    }

    #[test]
    fn invalid_cutoff() {
        let s = TimeSeries::new(vec![0.0; 10], 1000.0, 0.0).unwrap();
        assert!(matches!(
            highpass_filter(&s, 0.0),
            Err(DspError::InvalidCutoff { .. })
        ));
        assert!(matches!(
            highpass_filter(&s, 500.0),
            Err(DspError::InvalidCutoff { .. })
        ));
        assert!(HighpassFilter::new(8.0, 1000.0, 0).is_err());
    }

    #[test]
    fn length_preserved() {
        let s = TimeSeries::new(vec![0.5; 123], 1000.0, 2.0).unwrap();
        let out = highpass_filter(&s, 8.0).unwrap();
        assert_eq!(out.len(), 123);
        assert_eq!(out.start_time(), 2.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn linear(
                x in proptest::collection::vec(-1.0f64..1.0, 1..400),
                a in -3.0f64..3.0,
                b in -3.0f64..3.0,
                order in 1usize..4,
            ) {
                let y: Vec<f64> = x.iter().rev().map(|v| v * 0.5 - 0.1).collect();
                let f = HighpassFilter::new(8.0, 1000.0, order).unwrap();
                let mixed: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
                let lhs = f.apply_slice(&mixed);
                let fx = f.apply_slice(&x);
                let fy = f.apply_slice(&y);
                for i in 0..x.len() {
                    prop_assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
                }
            }
        }
    }
}
