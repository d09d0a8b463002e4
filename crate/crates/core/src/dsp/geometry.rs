use serde::{Deserialize, Serialize};

use super::DspError;

/// Physical layout of the optical wingbeat sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorGeometry {
    /// Length of the illuminated path along the flight direction, in m.
    pub active_length_m: f64,
    pub sensor_area_mm: (f64, f64),
    /// Design band of wingbeat frequencies, in Hz.
    pub freq_band_hz: (f64, f64),
    /// Design band of flight speeds (2 to 30 km/h), in m/s.
    pub speed_band_mps: (f64, f64),
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self {
            active_length_m: 0.06,
            sensor_area_mm: (100.0, 100.0),
            freq_band_hz: (200.0, 600.0),
            speed_band_mps: (2.0 / 3.6, 30.0 / 3.6),
        }
    }
}

impl SensorGeometry {
    pub fn validate(&self) -> Result<(), DspError> {
        if !(self.active_length_m > 0.0) {
            return Err(DspError::InvalidGeometry("active length must be positive"));
        }
        if !(self.sensor_area_mm.0 > 0.0 && self.sensor_area_mm.1 > 0.0) {
            return Err(DspError::InvalidGeometry("sensor area must be positive"));
        }
        if !(self.freq_band_hz.0 < self.freq_band_hz.1) {
            return Err(DspError::InvalidGeometry("frequency band is empty"));
        }
        if !(self.speed_band_mps.0 < self.speed_band_mps.1) {
            return Err(DspError::InvalidGeometry("speed band is empty"));
        }
        Ok(())
    }

    /// Time an insect flying at `speed_mps` spends in the active path.
    pub fn transit_duration(&self, speed_mps: f64) -> Result<f64, DspError> {
        if !(speed_mps > 0.0) {
            return Err(DspError::ZeroSpeed(speed_mps));
        }
        Ok(self.active_length_m / speed_mps)
    }
}

/// Number of wing beats that fit in one pass through the active path.
///
/// Note that the design bands do not give 2 to 50 beats at their corners:
/// 200 Hz at 30 km/h yields only 1.44 beats.
pub fn expected_beats_in_path(
    wingbeat_hz: f64,
    speed_mps: f64,
    geometry: &SensorGeometry,
) -> Result<f64, DspError> {
    if !(wingbeat_hz >= 0.0) {
        return Err(DspError::NegativeFrequency(wingbeat_hz));
    }
    Ok(wingbeat_hz * geometry.transit_duration(speed_mps)?)
}
