use serde::{Deserialize, Serialize};

use super::AcquisitionError;
use crate::dsp::TimeSeries;

/// Light-barrier and illumination timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerConfig {
    /// Beam level (fraction of unobstructed) below which the barrier trips.
    pub beam_threshold: f64,
    pub flash_duration_s: f64,
    pub exposure_s: f64,
    /// Dead time after a trigger during which the barrier is ignored.
    pub refractory_s: f64,
    pub frames_to_select: usize,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            beam_threshold: 0.5,
            flash_duration_s: 500e-6,
            exposure_s: 23.5e-3,
            refractory_s: 0.25,
            frames_to_select: 3,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<(), AcquisitionError> {
        if !(self.beam_threshold > 0.0 && self.beam_threshold < 1.0) {
            return Err(AcquisitionError::InvalidConfig("beam_threshold must lie in (0, 1)"));
        }
        if !(self.flash_duration_s > 0.0 && self.flash_duration_s < self.exposure_s) {
            return Err(AcquisitionError::InvalidConfig(
                "flash must be positive and shorter than the exposure",
            ));
        }
        if !(self.refractory_s >= 0.0) {
            return Err(AcquisitionError::InvalidConfig("refractory_s must be >= 0"));
        }
        if self.frames_to_select == 0 {
            return Err(AcquisitionError::InvalidConfig("frames_to_select must be >= 1"));
        }
        Ok(())
    }
}

/// Replays the light barrier over a beam trace and returns trigger times.
///
/// A trigger fires on the first sample below threshold that follows a sample
/// at or above it, unless the previous trigger is less than `refractory_s`
/// old.
pub fn run_trigger(beam: &TimeSeries, config: &TriggerConfig) -> Result<Vec<f64>, AcquisitionError> {
    config.validate()?;
    let samples = beam.samples();
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(AcquisitionError::InvalidBeamRange { index, value });
    }
    let mut triggers: Vec<f64> = Vec::new();
    for i in 1..samples.len() {
        if samples[i] < config.beam_threshold && samples[i - 1] >= config.beam_threshold {
            let t = beam.time_at(i);
            if triggers.last().is_none_or(|last| t - last >= config.refractory_s) {
                triggers.push(t);
            }
        }
    }
    Ok(triggers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam_with_dips(fs: f64, seconds: f64, dips: &[(f64, f64)]) -> TimeSeries {
        let n = (fs * seconds) as usize;
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                if dips.iter().any(|(a, b)| t >= *a && t < *b) {
                    0.2
                } else {
                    1.0
                }
            })
            .collect();
        TimeSeries::new(s, fs, 0.0).unwrap()
    }

    #[test]
    fn clear_beam_never_triggers() {
        let beam = beam_with_dips(1000.0, 2.0, &[]);
        assert!(run_trigger(&beam, &TriggerConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn single_dip() {
        let fs = 10_000.0;
        let beam = beam_with_dips(fs, 2.0, &[(1.0, 1.01)]);
        let t = run_trigger(&beam, &TriggerConfig::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0] - 1.0).abs() <= 1.0 / fs);
    }

    #[test]
    fn refractory_replay() {
        let beam = beam_with_dips(1000.0, 3.0, &[(1.0, 1.01), (1.5, 1.51)]);
        let cfg = TriggerConfig::default();
        assert_eq!(run_trigger(&beam, &cfg).unwrap().len(), 2);

        // a flicker 0.1 s after the first dip is inside the refractory period
        let beam = beam_with_dips(1000.0, 3.0, &[(1.0, 1.01), (1.1, 1.11)]);
        assert_eq!(run_trigger(&beam, &cfg).unwrap().len(), 1);
    }

    #[test]
    fn starts_occluded() {
        // no above-threshold sample precedes the first one
        let beam = beam_with_dips(1000.0, 1.0, &[(0.0, 0.1)]);
        assert!(run_trigger(&beam, &TriggerConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_beam() {
        let beam = TimeSeries::new(vec![1.0, 1.2, 0.3], 1000.0, 0.0).unwrap();
        assert!(matches!(
            run_trigger(&beam, &TriggerConfig::default()),
            Err(AcquisitionError::InvalidBeamRange { index: 1, .. })
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = TriggerConfig {
            flash_duration_s: 0.03,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TriggerConfig {
            beam_threshold: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
