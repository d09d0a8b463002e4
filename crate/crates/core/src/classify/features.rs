use serde::{Deserialize, Serialize};

use super::ClassifyError;
use crate::acquisition::{Frame, Modality};
use crate::dsp::{
    extract_harmonics, remove_dc, welch_psd, HarmonicConfig, HighpassFilter, PowerSpectrum,
    TimeSeries, WelchConfig,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub modality: Modality,
    pub schema_version: u32,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, modality: Modality) -> Self {
        Self {
            values,
            modality,
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WingbeatFeatureConfig {
    pub highpass_cutoff_hz: f64,
    pub highpass_order: usize,
    pub welch: WelchConfig,
    pub harmonics: HarmonicConfig,
    /// Number of log-spaced PSD bands.
    pub bands: usize,
    pub band_range_hz: (f64, f64),
}

impl Default for WingbeatFeatureConfig {
    fn default() -> Self {
        Self {
            highpass_cutoff_hz: 8.0,
            highpass_order: 1,
            welch: WelchConfig::default(),
            harmonics: HarmonicConfig::default(),
            bands: 32,
            band_range_hz: (30.0, 1200.0),
        }
    }
}

impl WingbeatFeatureConfig {
    pub fn dimension(&self) -> usize {
        self.bands + 1 + self.harmonics.max_harmonics
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        let (lo, hi) = self.band_range_hz;
        if self.bands == 0 || !(lo > 0.0 && hi > lo) {
            return Err(ClassifyError::InvalidConfig("band layout needs >= 1 band over 0 < low < high"));
        }
        self.welch.validate()?;
        Ok(())
    }
}

const FLOOR: f64 = 1e-300;

/// Mean density over `[lo, hi)`, or the interpolated density at the band's
/// geometric centre when no grid bin falls inside.
fn band_density(spectrum: &PowerSpectrum, lo: f64, hi: f64) -> f64 {
    let (sum, count) = spectrum
        .frequencies()
        .iter()
        .zip(spectrum.psd())
        .filter(|(f, _)| **f >= lo && **f < hi)
        .fold((0.0, 0usize), |(s, n), (_, p)| (s + p, n + 1));
    if count > 0 {
        sum / count as f64
    } else {
        spectrum.density_at((lo * hi).sqrt())
    }
}

/// Log band energies, normalized fundamental and overtone powers of a
/// wingbeat segment.
///
/// Band values are `log10` of the band's mean density relative to the mean
/// density over the whole band range, so the vector ignores signal gain.
/// Segments shorter than the Welch segment length are analysed as a single
/// segment of their full length.
pub fn featurize_wingbeat(
    signal: &TimeSeries,
    config: &WingbeatFeatureConfig,
) -> Result<FeatureVector, ClassifyError> {
    config.validate()?;
    let centred = remove_dc(signal)?;
    let filter = HighpassFilter::new(config.highpass_cutoff_hz, signal.sample_rate(), config.highpass_order)?;
    let filtered = filter.apply(&centred)?;
    let mut welch = config.welch;
    welch.segment_len = welch.segment_len.min(filtered.len());
    let spectrum = welch_psd(&filtered, &welch)?;
    let profile = extract_harmonics(&spectrum, &config.harmonics)?;

    let (lo, hi) = config.band_range_hz;
    let reference = band_density(&spectrum, lo, hi).max(FLOOR);
    let ratio = (hi / lo).powf(1.0 / config.bands as f64);
    let mut values = Vec::with_capacity(config.dimension());
    for b in 0..config.bands {
        let start = lo * ratio.powi(b as i32);
        let end = if b + 1 == config.bands { hi } else { start * ratio };
        values.push((band_density(&spectrum, start, end).max(FLOOR) / reference).log10());
    }
    values.push(profile.fundamental_hz / hi);
    for order in 2..=config.harmonics.max_harmonics + 1 {
        values.push(profile.relative_power(order));
    }
    Ok(FeatureVector::new(values, Modality::Wingbeat))
}

/// Passes a frame's appearance descriptor through after validation.
pub fn featurize_image(frame: &Frame, dimension: usize) -> Result<FeatureVector, ClassifyError> {
    if frame.descriptor.len() != dimension {
        return Err(ClassifyError::BadDescriptor(format!(
            "length {} but {} expected",
            frame.descriptor.len(),
            dimension
        )));
    }
    if let Some(i) = frame.descriptor.iter().position(|v| !v.is_finite()) {
        return Err(ClassifyError::BadDescriptor(format!("entry {i} is not finite")));
    }
    Ok(FeatureVector::new(frame.descriptor.clone(), Modality::Image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{simulate_transit, Appearance, SimulationConfig, TransitScenario, TriggerConfig};
    use crate::dsp::{DspError, SensorGeometry, NOMINAL_SAMPLE_RATE};

    fn transit_signal(f0: f64) -> TimeSeries {
        let scenario = TransitScenario {
            species_id: "Apis mellifera".into(),
            entry_time: 1.0,
            speed_mps: 0.8,
            wingbeat_hz: f0,
            body_shadow_depth: 0.3,
            rng_seed: 11,
        };
        let sim = SimulationConfig::default();
        let appearance = Appearance::from_key("x", sim.descriptor_dim, 0.1);
        simulate_transit(
            &scenario,
            &SensorGeometry::default(),
            &TriggerConfig::default(),
            &sim,
            NOMINAL_SAMPLE_RATE,
            &appearance,
        )
        .unwrap()
        .photodiode
    }

    #[test]
    fn default_dimension() {
        let cfg = WingbeatFeatureConfig::default();
        let fv = featurize_wingbeat(&transit_signal(300.0), &cfg).unwrap();
        assert_eq!(fv.len(), 36);
        assert_eq!(cfg.dimension(), 36);
        assert!(fv.values.iter().all(|v| v.is_finite()));
        assert_eq!(fv.modality, Modality::Wingbeat);
    }

    #[test]
    fn fundamental_feature_round_trip() {
        let sig = transit_signal(300.0);
        let cfg = WingbeatFeatureConfig::default();
        let fv = featurize_wingbeat(&sig, &cfg).unwrap();
        let n = cfg.welch.segment_len.min(sig.len());
        let res = sig.sample_rate() / n as f64;
        assert!((fv.values[32] - 0.25).abs() <= res / 1200.0, "{}", fv.values[32]);
    }

    #[test]
    fn gain_invariant() {
        let sig = transit_signal(250.0);
        let scaled = sig.with_samples(sig.samples().iter().map(|v| 0.25 * v).collect());
        let cfg = WingbeatFeatureConfig::default();
        let a = featurize_wingbeat(&sig, &cfg).unwrap();
        let b = featurize_wingbeat(&scaled, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_signal_has_no_peak() {
        let sig = TimeSeries::new(vec![0.0; 20_000], NOMINAL_SAMPLE_RATE, 0.0).unwrap();
        assert!(matches!(
            featurize_wingbeat(&sig, &WingbeatFeatureConfig::default()),
            Err(ClassifyError::Dsp(DspError::NoPeak { .. }))
        ));
    }

    fn frame(descriptor: Vec<f64>) -> Frame {
        Frame {
            timestamp: 0.0,
            mean_brightness: 0.5,
            descriptor,
        }
    }

    #[test]
    fn image_pass_through() {
        let d = vec![0.5, -1.0, 2.0];
        let fv = featurize_image(&frame(d.clone()), 3).unwrap();
        assert_eq!(fv.values, d);
        assert_eq!(featurize_image(&frame(vec![0.0; 4]), 4).unwrap().values, vec![0.0; 4]);
        assert!(matches!(
            featurize_image(&frame(vec![0.0, f64::NAN]), 2),
            Err(ClassifyError::BadDescriptor(_))
        ));
        assert!(matches!(
            featurize_image(&frame(vec![0.0]), 2),
            Err(ClassifyError::BadDescriptor(_))
        ));
    }
}
