use serde::{Deserialize, Serialize};

use super::{DspError, PowerSpectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonicConfig {
    /// Band searched for the fundamental, in Hz.
    pub search_band_hz: (f64, f64),
    /// Number of overtones (orders 2, 3, ...) to look for.
    pub max_harmonics: usize,
    /// Overtones weaker than this fraction of the fundamental are dropped.
    pub min_relative_power: f64,
    /// Half-width of the overtone search window, in grid bins.
    pub tolerance_bins: f64,
    /// Required ratio of the fundamental to the median in-band density.
    /// Guards against reporting noise or envelope leakage as a wingbeat.
    pub min_prominence: f64,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        Self {
            search_band_hz: (30.0, 1200.0),
            max_harmonics: 3,
            min_relative_power: 0.01,
            tolerance_bins: 1.5,
            min_prominence: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: usize,
    pub frequency_hz: f64,
    /// Peak density relative to the fundamental, clamped to `[0, 1]`.
    pub relative_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicProfile {
    pub fundamental_hz: f64,
    pub fundamental_power: f64,
    /// Overtones in increasing order; missing orders are skipped.
    pub harmonics: Vec<Harmonic>,
}

impl HarmonicProfile {
    /// Relative power of overtone `order`, or 0 when it was not found.
    pub fn relative_power(&self, order: usize) -> f64 {
        self.harmonics
            .iter()
            .find(|h| h.order == order)
            .map_or(0.0, |h| h.relative_power)
    }
}

/// Offset in bins of the vertex of the parabola through three samples.
fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    let denom = left - 2.0 * centre + right;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
}

fn refined_frequency(psd: &[f64], bin: usize, resolution: f64) -> f64 {
    if bin == 0 || bin + 1 >= psd.len() {
        return bin as f64 * resolution;
    }
    (bin as f64 + parabolic_offset(psd[bin - 1], psd[bin], psd[bin + 1])) * resolution
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Locates the wingbeat fundamental and its overtones in a PSD.
///
/// The fundamental is the strongest local maximum inside the search band, refined by
/// three-point parabolic interpolation. Overtone `k` is the strongest local
/// peak within `tolerance_bins` of `k * f0`.
pub fn extract_harmonics(
    spectrum: &PowerSpectrum,
    config: &HarmonicConfig,
) -> Result<HarmonicProfile, DspError> {
    let (low_hz, high_hz) = config.search_band_hz;
    if !(low_hz >= 0.0 && high_hz > low_hz) {
        return Err(DspError::InvalidBand { low_hz, high_hz });
    }
    let no_peak = DspError::NoPeak { low_hz, high_hz };
    let psd = spectrum.psd();
    let res = spectrum.resolution();
    let first = (low_hz / res).ceil() as usize;
    let last = ((high_hz / res).floor() as usize).min(psd.len().saturating_sub(1));
    if psd.is_empty() || first > last {
        return Err(no_peak);
    }

    // Strongest local maximum in the band. Neighbours outside the band count,
    // so the decaying tail of the body-shadow spectrum at the lower band edge
    // is not mistaken for a wingbeat.
    let is_local_max = |i: usize| {
        psd[i] > 0.0
            && (i == 0 || psd[i] >= psd[i - 1])
            && (i + 1 >= psd.len() || psd[i] >= psd[i + 1])
    };
    let mut peak: Option<usize> = None;
    for i in first..=last {
        if is_local_max(i) && peak.is_none_or(|p| psd[i] > psd[p]) {
            peak = Some(i);
        }
    }
    let Some(peak) = peak else { return Err(no_peak) };
    let fundamental_power = psd[peak];
    let mut band: Vec<f64> = psd[first..=last].to_vec();
    let floor = median(&mut band);
    if floor > 0.0 && fundamental_power < config.min_prominence * floor {
        return Err(no_peak);
    }
    let fundamental_hz = refined_frequency(psd, peak, res).clamp(low_hz, high_hz);

    let tolerance = config.tolerance_bins * res;
    let mut harmonics = Vec::new();
    for order in 2..=config.max_harmonics + 1 {
        let target = order as f64 * fundamental_hz;
        if target - tolerance > spectrum.max_frequency() {
            break;
        }
        let lo = ((target - tolerance) / res).ceil().max(1.0) as usize;
        let hi = (((target + tolerance) / res).floor() as usize).min(psd.len() - 2);
        let best = (lo..=hi)
            .filter(|&j| psd[j] > 0.0 && psd[j] >= psd[j - 1] && psd[j] >= psd[j + 1])
            .max_by(|&a, &b| psd[a].total_cmp(&psd[b]).then(b.cmp(&a)));
        let Some(bin) = best else { continue };
        let relative = psd[bin] / fundamental_power;
        if relative < config.min_relative_power {
            continue;
        }
        harmonics.push(Harmonic {
            order,
            frequency_hz: refined_frequency(psd, bin, res)
                .clamp(target - tolerance, target + tolerance),
            relative_power: relative.min(1.0),
        });
    }

    Ok(HarmonicProfile {
        fundamental_hz,
        fundamental_power,
        harmonics,
    })
}
