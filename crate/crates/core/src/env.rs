//! Environmental readings and the species prior they induce.
//!
//! A [`SpeciesPriorTable`] lists, for each species, the temperature range and
//! hours of the day in which it flies. [`species_prior`] turns an
//! [`EnvSnapshot`] into a distribution over species and [`apply_prior`]
//! folds that distribution into classifier output with Bayes' rule.

use std::path::Path;

use serde::{Deserialize, Serialize};

/// Wavelength labels of the ten spectral channels, in storage order.
pub const SPECTRAL_BANDS: [&str; 10] = [
    "415nm", "445nm", "480nm", "515nm", "550nm", "590nm", "660nm", "690nm", "nir", "clear",
];

const BLUE_CHANNELS: std::ops::Range<usize> = 0..3;
const RED_CHANNELS: std::ops::Range<usize> = 5..8;
const CLEAR_CHANNEL: usize = 9;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("red-band spectral mean is zero")]
    ZeroSpectrum,
    #[error("invalid spectral reading: {0}")]
    InvalidSpectrum(&'static str),
    #[error("invalid environment snapshot: {0}")]
    InvalidSnapshot(&'static str),
    #[error("species prior table is empty")]
    EmptyTable,
    #[error("invalid prior table row for {species}: {reason}")]
    InvalidTable { species: String, reason: &'static str },
    #[error("probability vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("vector is not a probability distribution (sum {0})")]
    NotNormalized(f64),
    #[error("species {0} missing from the prior table")]
    UnknownSpecies(String),
    #[error("prior table CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl EnvError {
    pub fn kind(&self) -> &'static str {
        match self {
            EnvError::ZeroSpectrum => "ZeroSpectrum",
            EnvError::InvalidSpectrum(_) => "InvalidSpectrum",
            EnvError::InvalidSnapshot(_) => "InvalidSnapshot",
            EnvError::EmptyTable => "EmptyTable",
            EnvError::InvalidTable { .. } => "InvalidTable",
            EnvError::LengthMismatch(..) => "LengthMismatch",
            EnvError::NotNormalized(_) => "NotNormalized",
            EnvError::UnknownSpecies(_) => "UnknownSpecies",
            EnvError::Csv(_) => "ParseError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSnapshot {
    pub timestamp: f64,
    pub temperature_c: f64,
    pub humidity_pct: f64,
    pub pressure_hpa: f64,
    pub lux: f64,
    /// Channels in [`SPECTRAL_BANDS`] order.
    pub spectral_channels: [f64; 10],
}

impl EnvSnapshot {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(0.0..=100.0).contains(&self.humidity_pct) {
            return Err(EnvError::InvalidSnapshot("humidity outside [0, 100] %"));
        }
        if !(self.lux >= 0.0) {
            return Err(EnvError::InvalidSnapshot("negative illuminance"));
        }
        if self.spectral_channels.iter().any(|c| !(*c >= 0.0)) {
            return Err(EnvError::InvalidSnapshot("negative spectral channel"));
        }
        if !self.timestamp.is_finite() || !self.temperature_c.is_finite() {
            return Err(EnvError::InvalidSnapshot("non-finite reading"));
        }
        Ok(())
    }

    /// Local hour of day in `[0, 24)`.
    pub fn local_hour(&self, utc_offset_hours: f64) -> f64 {
        (self.timestamp / 3600.0 + utc_offset_hours).rem_euclid(24.0)
    }
}

/// Cloud-cover proxy from the blue/red balance of the spectral channels.
///
/// 0 means a clear, blue-dominated sky; 1 means the blue excess has been
/// scattered away entirely.
pub fn cloudage_index(spectral_channels: &[f64; 10]) -> Result<f64, EnvError> {
    if spectral_channels.iter().any(|c| !(*c >= 0.0)) {
        return Err(EnvError::InvalidSpectrum("channels must be non-negative"));
    }
    if !(spectral_channels[CLEAR_CHANNEL] > 0.0) {
        return Err(EnvError::InvalidSpectrum("clear channel must be positive"));
    }
    let mean = |r: std::ops::Range<usize>| {
        let n = r.len() as f64;
        spectral_channels[r].iter().sum::<f64>() / n
    };
    let red = mean(RED_CHANNELS);
    if red == 0.0 {
        return Err(EnvError::ZeroSpectrum);
    }
    Ok((1.0 - mean(BLUE_CHANNELS) / red).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesPrior {
    pub species_id: String,
    pub temp_min_c: f64,
    pub temp_max_c: f64,
    /// Start of the active window, local hour in `[0, 24]`.
    pub hour_start: f64,
    /// End of the active window; a window may wrap past midnight.
    pub hour_end: f64,
    pub base_rate: f64,
}

impl SpeciesPrior {
    fn in_temperature_range(&self, t: f64) -> bool {
        t >= self.temp_min_c && t <= self.temp_max_c
    }

    fn is_active_at(&self, hour: f64) -> bool {
        let (s, e) = (self.hour_start, self.hour_end);
        if s == e {
            true
        } else if s < e {
            hour >= s && hour < e
        } else {
            hour >= s || hour < e
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpeciesPriorTable {
    entries: Vec<SpeciesPrior>,
}

impl SpeciesPriorTable {
    pub fn new(entries: Vec<SpeciesPrior>) -> Result<Self, EnvError> {
        if entries.is_empty() {
            return Err(EnvError::EmptyTable);
        }
        for e in &entries {
            let bad = |reason| EnvError::InvalidTable {
                species: e.species_id.clone(),
                reason,
            };
            if !(e.temp_min_c < e.temp_max_c) {
                return Err(bad("temp_min_c must be below temp_max_c"));
            }
            if !(0.0..=24.0).contains(&e.hour_start) || !(0.0..=24.0).contains(&e.hour_end) {
                return Err(bad("hours must lie in [0, 24]"));
            }
            if !(e.base_rate >= 0.0 && e.base_rate.is_finite()) {
                return Err(bad("base_rate must be finite and >= 0"));
            }
        }
        if entries.iter().all(|e| e.base_rate == 0.0) {
            return Err(EnvError::InvalidTable {
                species: "*".into(),
                reason: "at least one base_rate must be positive",
            });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[SpeciesPrior] {
        &self.entries
    }

    pub fn species_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.species_id.as_str())
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, EnvError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let entries = rdr.deserialize().collect::<Result<Vec<SpeciesPrior>, _>>()?;
        Self::new(entries)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let file = std::fs::File::open(path.as_ref()).map_err(csv::Error::from)?;
        Self::from_csv_reader(file)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), EnvError> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reorders a table-ordered vector into `classes` order.
    pub fn align(&self, prior: &[f64], classes: &[String]) -> Result<Vec<f64>, EnvError> {
        if prior.len() != self.entries.len() {
            return Err(EnvError::LengthMismatch(prior.len(), self.entries.len()));
        }
        classes
            .iter()
            .map(|c| {
                self.entries
                    .iter()
                    .position(|e| &e.species_id == c)
                    .map(|i| prior[i])
                    .ok_or_else(|| EnvError::UnknownSpecies(c.clone()))
            })
            .collect()
    }
}

fn normalized(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Prior over the table's species, in table order.
///
/// Each species gets `base_rate * [temperature in range] * [hour in window]`.
/// When every species is ruled out the base rates alone are used.
pub fn species_prior(
    env: &EnvSnapshot,
    table: &SpeciesPriorTable,
    utc_offset_hours: f64,
) -> Result<Vec<f64>, EnvError> {
    if table.entries.is_empty() {
        return Err(EnvError::EmptyTable);
    }
    let hour = env.local_hour(utc_offset_hours);
    let weights: Vec<f64> = table
        .entries
        .iter()
        .map(|e| {
            if e.in_temperature_range(env.temperature_c) && e.is_active_at(hour) {
                e.base_rate
            } else {
                0.0
            }
        })
        .collect();
    if weights.iter().sum::<f64>() > 0.0 {
        Ok(normalized(&weights))
    } else {
        let base: Vec<f64> = table.entries.iter().map(|e| e.base_rate).collect();
        Ok(normalized(&base))
    }
}

fn check_distribution(v: &[f64]) -> Result<(), EnvError> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
        return Err(EnvError::NotNormalized(sum));
    }
    Ok(())
}

/// Bayes combination `posterior * prior`, renormalized.
///
/// If the product vanishes everywhere the classifier posterior is returned
/// unchanged.
pub fn apply_prior(posterior: &[f64], prior: &[f64]) -> Result<Vec<f64>, EnvError> {
    if posterior.len() != prior.len() {
        return Err(EnvError::LengthMismatch(posterior.len(), prior.len()));
    }
    check_distribution(posterior)?;
    check_distribution(prior)?;
    let product: Vec<f64> = posterior.iter().zip(prior).map(|(a, b)| a * b).collect();
    if product.iter().sum::<f64>() > 0.0 {
        Ok(normalized(&product))
    } else {
        Ok(posterior.to_vec())
    }
}
