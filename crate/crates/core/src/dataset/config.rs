use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetError, Split};
use crate::acquisition::{SimulationConfig, TriggerConfig};
use crate::classify::{FusionConfig, SvmConfig, WingbeatFeatureConfig};
use crate::dsp::SensorGeometry;

/// Which manifest records an evaluation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSelection {
    Train,
    Test,
    All,
}

impl SplitSelection {
    pub fn includes(self, split: Split) -> bool {
        match self {
            SplitSelection::All => true,
            SplitSelection::Train => split == Split::Train,
            SplitSelection::Test => split == Split::Test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub split: SplitSelection,
    /// Half-width of the frame selection window around a trigger, in seconds.
    pub frame_window_s: f64,
    /// Co-registration window, in seconds.
    pub coregistration_window_s: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            split: SplitSelection::Test,
            frame_window_s: 0.5,
            coregistration_window_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Multiply posteriors by the environmental prior when events carry
    /// environment snapshots.
    pub enabled: bool,
    /// Species prior table (CSV); relative to the manifest directory.
    pub table: String,
    pub utc_offset_hours: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            table: "priors.csv".into(),
            utc_offset_hours: 0.0,
        }
    }
}

/// Every tunable of a run. Loaded from TOML; missing keys take the defaults
/// and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub features: WingbeatFeatureConfig,
    pub svm: SvmConfig,
    pub fusion: FusionConfig,
    pub geometry: SensorGeometry,
    pub trigger: TriggerConfig,
    pub simulation: SimulationConfig,
    pub evaluation: EvalConfig,
    pub prior: PriorConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let wrap = |e: String| DatasetError::Config(e);
        self.features.validate().map_err(|e| wrap(e.to_string()))?;
        self.svm.validate().map_err(|e| wrap(e.to_string()))?;
        self.fusion.validate().map_err(|e| wrap(e.to_string()))?;
        self.geometry.validate().map_err(|e| wrap(e.to_string()))?;
        self.trigger.validate().map_err(|e| wrap(e.to_string()))?;
        self.simulation.validate().map_err(|e| wrap(e.to_string()))?;
        if !(self.evaluation.frame_window_s > 0.0 && self.evaluation.coregistration_window_s >= 0.0) {
            return Err(wrap("evaluation windows must be positive".into()));
        }
        if !self.prior.utc_offset_hours.is_finite() {
            return Err(wrap("prior.utc_offset_hours must be finite".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        let config: Self = toml::from_str(text).map_err(|e| DatasetError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(DatasetError::io(path))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections() {
        let text = "[svm]\nlambda = 0.01\nseed = 7\n\n[features.welch]\nsegment_len = 4096\n";
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.svm.lambda, 0.01);
        assert_eq!(c.svm.seed, 7);
        assert_eq!(c.svm.epochs, SvmConfig::default().epochs);
        assert_eq!(c.features.welch.segment_len, 4096);
    }

    #[test]
    fn rejects_unknown_and_out_of_range() {
        assert!(matches!(RunConfig::from_toml("[svm]\ngamma = 1\n"), Err(DatasetError::Config(_))));
        assert!(matches!(RunConfig::from_toml("colour = 1\n"), Err(DatasetError::Config(_))));
        assert!(matches!(RunConfig::from_toml("[svm]\nlambda = -1.0\n"), Err(DatasetError::Config(_))));
        assert!(RunConfig::from_toml("[features.welch]\noverlap_fraction = 1.0\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.fusion.seed = 3;
        c.evaluation.split = SplitSelection::All;
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
