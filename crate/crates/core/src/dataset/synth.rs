use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::stratified_split;
use super::{write_embeddings_csv, DatasetError, DatasetManifest, ManifestRecord, RunConfig, Split};
use crate::acquisition::{
    co_register, select_frames, simulate_transit, Appearance, DetectionEvent, TransitScenario,
};
use crate::classify::{TaxonLabel, TaxonomyTree};
use crate::dsp::wav::write_wav;
use crate::env::{EnvSnapshot, SpeciesPrior, SpeciesPriorTable};
use crate::Result;

/// Generator settings for one species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesProfile {
    pub taxon: TaxonLabel,
    pub count: usize,
    /// Mean wingbeat fundamental, in Hz.
    pub wingbeat_hz: f64,
    /// Standard deviation of the fundamental relative to the mean.
    pub wingbeat_spread: f64,
    /// Species with the same key share an image descriptor prototype.
    pub appearance_key: String,
    pub temp_range_c: (f64, f64),
    /// Active local hours; the window may wrap past midnight.
    pub active_hours: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub sample_rate: f64,
    pub speed_range_mps: (f64, f64),
    pub shadow_depth_range: (f64, f64),
    /// Per-coordinate deviation of frame descriptors around the prototype.
    pub descriptor_spread: f64,
    /// Share of events whose camera frames are dropped.
    #[serde(default)]
    pub missing_camera_fraction: f64,
    pub test_fraction: f64,
    pub species: Vec<SpeciesProfile>,
}

fn profile(
    taxon: TaxonLabel,
    count: usize,
    wingbeat_hz: f64,
    appearance_key: &str,
    temp_range_c: (f64, f64),
    active_hours: (f64, f64),
) -> SpeciesProfile {
    SpeciesProfile {
        taxon,
        count,
        wingbeat_hz,
        wingbeat_spread: 0.08,
        appearance_key: appearance_key.into(),
        temp_range_c,
        active_hours,
    }
}

impl Default for SynthSpec {
    /// Seven species with an unbalanced histogram. Wingbeat and appearance
    /// are complementary: species that share a wingbeat band look different
    /// and look-alikes flap at different rates, so only the fused classifier
    /// can separate every pair.
    fn default() -> Self {
        let l = TaxonomyTree::default_tree().leaves().to_vec();
        let species = vec![
            profile(l[0].clone(), 480, 230.0, "amber-banded", (10.0, 35.0), (8.0, 18.0)),
            profile(l[1].clone(), 320, 160.0, "black-furry", (5.0, 30.0), (6.0, 20.0)),
            profile(l[2].clone(), 40, 160.0, "large-hornet", (12.0, 35.0), (8.0, 22.0)),
            profile(l[3].clone(), 32, 320.0, "yellow-black-slender", (15.0, 35.0), (9.0, 18.0)),
            profile(l[4].clone(), 20, 320.0, "scorpionfly", (12.0, 30.0), (8.0, 20.0)),
            profile(l[5].clone(), 160, 450.0, "amber-banded", (10.0, 32.0), (8.0, 19.0)),
            profile(l[6].clone(), 80, 230.0, "yellow-black-slender", (10.0, 30.0), (7.0, 19.0)),
        ];
        Self {
            seed: 2024,
            sample_rate: 96_000.0,
            speed_range_mps: (0.6, 1.5),
            shadow_depth_range: (0.2, 0.4),
            descriptor_spread: 0.8,
            missing_camera_fraction: 0.0,
            test_fraction: 0.3,
            species,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> std::result::Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::InvalidSpec(m.into()));
        if self.species.is_empty() {
            return Err(DatasetError::EmptySpec);
        }
        if !(self.sample_rate > 0.0) {
            return bad("sample_rate must be positive");
        }
        let (v0, v1) = self.speed_range_mps;
        if !(v0 > 0.0 && v1 >= v0) {
            return bad("speed_range_mps must satisfy 0 < low <= high");
        }
        let (d0, d1) = self.shadow_depth_range;
        if !(d0 > 0.0 && d1 >= d0 && d1 <= 1.0) {
            return bad("shadow_depth_range must lie in (0, 1]");
        }
        if !(self.descriptor_spread >= 0.0) {
            return bad("descriptor_spread must be >= 0");
        }
        if !(0.0..1.0).contains(&self.missing_camera_fraction) || !(0.0..1.0).contains(&self.test_fraction) {
            return bad("fractions must lie in [0, 1)");
        }
        let tree: Vec<TaxonLabel> = self.species.iter().map(|s| s.taxon.clone()).collect();
        TaxonomyTree::new(tree).map_err(|e| DatasetError::InvalidSpec(e.to_string()))?;
        for s in &self.species {
            let name = s.taxon.key();
            if s.count == 0 {
                return Err(DatasetError::InvalidSpec(format!("{name}: count must be >= 1")));
            }
            if !(s.wingbeat_hz > 0.0 && s.wingbeat_spread >= 0.0) {
                return Err(DatasetError::InvalidSpec(format!("{name}: wingbeat must be positive")));
            }
        }
        self.prior_table().map_err(|e| DatasetError::InvalidSpec(e.to_string()))?;
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.species.iter().map(|s| s.count).sum()
    }

    /// Environmental prior table matching the generator's activity windows;
    /// base rates follow the species counts.
    pub fn prior_table(&self) -> std::result::Result<SpeciesPriorTable, crate::env::EnvError> {
        let total = self.total() as f64;
        SpeciesPriorTable::new(
            self.species
                .iter()
                .map(|s| SpeciesPrior {
                    species_id: s.taxon.key(),
                    temp_min_c: s.temp_range_c.0,
                    temp_max_c: s.temp_range_c.1,
                    hour_start: s.active_hours.0,
                    hour_end: s.active_hours.1,
                    base_rate: s.count as f64 / total,
                })
                .collect(),
        )
    }
}

/// One generated event with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthEvent {
    pub taxon: TaxonLabel,
    pub split: Split,
    pub event: DetectionEvent,
}

fn event_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer over (seed, index)
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn active_hour(rng: &mut ChaCha8Rng, (start, end): (f64, f64)) -> f64 {
    let span = if start == end {
        24.0
    } else {
        (end - start).rem_euclid(24.0)
    };
    (start + rng.random_range(0.0..1.0) * span).rem_euclid(24.0)
}

fn synth_one(spec: &SynthSpec, config: &RunConfig, species: &SpeciesProfile, index: usize, split: Split) -> Result<SynthEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(event_seed(spec.seed, index));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let f0 = (species.wingbeat_hz * (1.0 + species.wingbeat_spread * normal.sample(&mut rng)))
        .clamp(0.5 * species.wingbeat_hz, 2.0 * species.wingbeat_hz);
    let speed = rng.random_range(spec.speed_range_mps.0..=spec.speed_range_mps.1);
    let depth = rng.random_range(spec.shadow_depth_range.0..=spec.shadow_depth_range.1);
    let hour = active_hour(&mut rng, species.active_hours);
    let (t_lo, t_hi) = species.temp_range_c;
    let temperature = rng.random_range(t_lo..t_hi);
    let drop_camera = rng.random_range(0.0..1.0) < spec.missing_camera_fraction;
    // one synthetic day per event keeps triggers unique and the local hour exact
    let entry_time = (index as f64 + 1.0) * 86_400.0 + hour * 3600.0;
    let scenario = TransitScenario {
        species_id: species.taxon.key(),
        entry_time,
        speed_mps: speed,
        wingbeat_hz: f0,
        body_shadow_depth: depth,
        rng_seed: rng.random(),
    };
    let appearance = Appearance::from_key(
        &species.appearance_key,
        config.simulation.descriptor_dim,
        spec.descriptor_spread,
    );
    let transit = simulate_transit(
        &scenario,
        &config.geometry,
        &config.trigger,
        &config.simulation,
        spec.sample_rate,
        &appearance,
    )?;
    let Some(&trigger) = transit.trigger_times.first() else {
        return Err(DatasetError::InvalidSpec(format!("event {index} produced no trigger")).into());
    };
    let frames = select_frames(
        &transit.frames,
        trigger,
        config.evaluation.frame_window_s,
        config.trigger.frames_to_select,
    )?;
    let mut spectral = [0.0; 10];
    for c in spectral.iter_mut() {
        *c = rng.random_range(0.1..1.0);
    }
    let env = EnvSnapshot {
        timestamp: trigger,
        temperature_c: temperature,
        humidity_pct: rng.random_range(30.0..90.0),
        pressure_hpa: rng.random_range(990.0..1030.0),
        lux: rng.random_range(1e3..8e4),
        spectral_channels: spectral,
    };
    let event = co_register(
        trigger,
        Some(transit.photodiode),
        (!drop_camera).then_some(frames),
        Some(env),
        config.evaluation.coregistration_window_s,
    )?;
    Ok(SynthEvent {
        taxon: species.taxon.clone(),
        split,
        event,
    })
}

/// Generates the events of a spec in memory, in species order.
///
/// Every event draws from its own generator seeded by the spec seed and the
/// event index, so the output does not depend on thread scheduling.
pub fn synth_events(spec: &SynthSpec, config: &RunConfig) -> Result<Vec<SynthEvent>> {
    spec.validate()?;
    config.validate()?;
    let owners: Vec<usize> = spec
        .species
        .iter()
        .enumerate()
        .flat_map(|(s, p)| std::iter::repeat_n(s, p.count))
        .collect();
    let splits = stratified_split(&owners, spec.test_fraction, spec.seed);
    owners
        .par_iter()
        .zip(splits.par_iter())
        .enumerate()
        .map(|(i, (&s, &split))| synth_one(spec, config, &spec.species[s], i, split))
        .collect()
}

/// Writes a synthetic data set to `out_dir`: `manifest.jsonl`, 24-bit WAVs
/// under `wav/`, frame descriptors in `descriptors.csv`, the matching
/// environmental prior table `priors.csv` and the spec itself.
pub fn synth_dataset(spec: &SynthSpec, config: &RunConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let out = out_dir.as_ref();
    let events = synth_events(spec, config)?;
    let wav_dir = out.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(DatasetError::io(&wav_dir))?;

    let records: Vec<ManifestRecord> = events
        .par_iter()
        .map(|e| -> Result<ManifestRecord> {
            let id = &e.event.event_id;
            let wav_rel = format!("wav/{id}.wav");
            let wav = e.event.wingbeat.as_ref().expect("synthetic events carry a wingbeat");
            write_wav(out.join(&wav_rel), wav, 24)?;
            Ok(ManifestRecord {
                event_id: id.clone(),
                taxon: e.taxon.clone(),
                trigger_time: Some(e.event.trigger_time),
                wav_path: Some(wav_rel),
                image_descriptor_ref: e.event.frames.as_ref().map(|_| "descriptors.csv".to_string()),
                env: e.event.env.clone(),
                split: e.split,
            })
        })
        .collect::<Result<_>>()?;

    let rows: Vec<(String, Vec<f64>)> = events
        .iter()
        .flat_map(|e| {
            e.event
                .frames
                .iter()
                .flatten()
                .map(move |f| (e.event.event_id.clone(), f.descriptor.clone()))
        })
        .collect();
    let desc_path = out.join("descriptors.csv");
    let file = std::fs::File::create(&desc_path).map_err(DatasetError::io(&desc_path))?;
    write_embeddings_csv(std::io::BufWriter::new(file), config.simulation.descriptor_dim, &rows)?;

    let prior_path = out.join("priors.csv");
    let file = std::fs::File::create(&prior_path).map_err(DatasetError::io(&prior_path))?;
    spec.prior_table()?.write_csv(file)?;

    let spec_path = out.join("spec.json");
    let mut text = serde_json::to_string_pretty(spec).map_err(DatasetError::from)?;
    text.push('\n');
    std::fs::write(&spec_path, text).map_err(DatasetError::io(&spec_path))?;

    let manifest = DatasetManifest {
        records,
        base_dir: out.to_path_buf(),
    };
    manifest.save(out.join("manifest.jsonl"))?;
    Ok(manifest)
}
