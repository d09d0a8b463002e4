//! Synthetic insect transit through the camera arena and wingbeat sensor.
//!
//! The photodiode sees `1 - d * e(t) * (1 + m * sum_k a_k sin(2 pi k f t + phi_k))`
//! scaled by the ADC gain, where `e` is a raised-cosine shadow envelope
//! spanning the time the insect needs to cross the active path, `d` the body
//! shadow depth, `m` the wing modulation depth and `a_k` the harmonic
//! amplitudes (power halves per order by default). Sensor noise is white and
//! sits `noise_db` below the fundamental amplitude.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{run_trigger, AcquisitionError, Frame, RingBuffer, TriggerConfig};
use crate::dsp::{SensorGeometry, TimeSeries};

/// One insect passing through the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitScenario {
    pub species_id: String,
    /// Time the insect enters the active path, in seconds.
    pub entry_time: f64,
    pub speed_mps: f64,
    pub wingbeat_hz: f64,
    /// Fraction of the beam blocked by the body at the transit centre.
    pub body_shadow_depth: f64,
    pub rng_seed: u64,
}

impl TransitScenario {
    pub fn validate(&self) -> Result<(), AcquisitionError> {
        if !(self.speed_mps > 0.0 && self.speed_mps.is_finite()) {
            return Err(AcquisitionError::InvalidScenario("speed_mps must be positive"));
        }
        if !(self.body_shadow_depth > 0.0 && self.body_shadow_depth <= 1.0) {
            return Err(AcquisitionError::InvalidScenario(
                "body_shadow_depth must lie in (0, 1]",
            ));
        }
        if !(self.wingbeat_hz >= 0.0 && self.wingbeat_hz.is_finite()) {
            return Err(AcquisitionError::InvalidScenario("wingbeat_hz must be >= 0"));
        }
        if !(self.entry_time >= 0.0 && self.entry_time.is_finite()) {
            return Err(AcquisitionError::InvalidScenario("entry_time must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Photodiode recording before entry and after exit, in seconds.
    pub pre_margin_s: f64,
    pub post_margin_s: f64,
    /// Camera recording before entry and after exit, in seconds.
    pub camera_margin_s: f64,
    pub frame_rate_hz: f64,
    pub ring_capacity: usize,
    /// Number of consecutive frames strobed after each trigger.
    pub strobe_frames: usize,
    pub ambient_brightness: f64,
    pub brightness_jitter: f64,
    pub flash_gain: f64,
    /// Wing modulation depth relative to the body shadow.
    pub wing_modulation: f64,
    pub harmonic_orders: usize,
    /// Power ratio between successive harmonic orders.
    pub harmonic_power_decay: f64,
    /// Noise level relative to the fundamental amplitude, in dB.
    pub noise_db: f64,
    pub adc_gain: f64,
    /// Fraction of the light barrier blocked at the transit centre.
    pub beam_occlusion: f64,
    pub descriptor_dim: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            pre_margin_s: 0.05,
            post_margin_s: 0.05,
            camera_margin_s: 0.5,
            frame_rate_hz: 40.0,
            ring_capacity: 64,
            strobe_frames: 4,
            ambient_brightness: 0.15,
            brightness_jitter: 0.03,
            flash_gain: 0.7,
            wing_modulation: 0.5,
            harmonic_orders: 3,
            harmonic_power_decay: 0.5,
            noise_db: -40.0,
            adc_gain: 0.9,
            beam_occlusion: 0.9,
            descriptor_dim: 16,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), AcquisitionError> {
        let bad = AcquisitionError::InvalidConfig;
        if !(self.pre_margin_s >= 0.0 && self.post_margin_s >= 0.0 && self.camera_margin_s >= 0.0) {
            return Err(bad("margins must be >= 0"));
        }
        if !(self.frame_rate_hz > 0.0) {
            return Err(bad("frame_rate_hz must be positive"));
        }
        if self.ring_capacity == 0 || self.harmonic_orders == 0 || self.descriptor_dim == 0 {
            return Err(bad("ring_capacity, harmonic_orders and descriptor_dim must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.ambient_brightness) || !(self.flash_gain >= 0.0) {
            return Err(bad("brightness parameters out of range"));
        }
        if !(self.brightness_jitter >= 0.0 && self.wing_modulation >= 0.0) {
            return Err(bad("jitter and modulation must be >= 0"));
        }
        if !(self.harmonic_power_decay > 0.0 && self.harmonic_power_decay <= 1.0) {
            return Err(bad("harmonic_power_decay must lie in (0, 1]"));
        }
        if !(self.adc_gain > 0.0 && self.adc_gain <= 1.0) {
            return Err(bad("adc_gain must lie in (0, 1]"));
        }
        if !(self.beam_occlusion > 0.0 && self.beam_occlusion <= 1.0) {
            return Err(bad("beam_occlusion must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Appearance model for the synthetic image descriptor of a species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Appearance {
    pub prototype: Vec<f64>,
    /// Per-coordinate standard deviation of frame descriptors.
    pub spread: f64,
}

impl Appearance {
    /// Deterministic prototype derived from a stable hash of `key`.
    pub fn from_key(key: &str, dim: usize, spread: f64) -> Self {
        // FNV-1a: stable across platforms and releases.
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in key.bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(hash);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        Self {
            prototype: (0..dim).map(|_| normal.sample(&mut rng)).collect(),
            spread,
        }
    }
}

/// Everything one simulated transit produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Transit {
    /// Light-barrier level, 1 = unobstructed.
    pub beam: TimeSeries,
    pub photodiode: TimeSeries,
    pub frames: RingBuffer,
    pub trigger_times: Vec<f64>,
}

fn raised_cosine(t: f64, entry: f64, duration: f64) -> f64 {
    let u = (t - entry) / duration;
    if (0.0..=1.0).contains(&u) {
        0.5 * (1.0 - (2.0 * PI * u).cos())
    } else {
        0.0
    }
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Simulates beam, photodiode and camera for one transit.
///
/// Output is a pure function of the arguments; the scenario seed drives every
/// random draw.
pub fn simulate_transit(
    scenario: &TransitScenario,
    geometry: &SensorGeometry,
    trigger: &TriggerConfig,
    sim: &SimulationConfig,
    sample_rate: f64,
    appearance: &Appearance,
) -> Result<Transit, AcquisitionError> {
    scenario.validate()?;
    geometry.validate()?;
    trigger.validate()?;
    sim.validate()?;
    if appearance.prototype.len() != sim.descriptor_dim {
        return Err(AcquisitionError::InvalidConfig(
            "appearance prototype length differs from descriptor_dim",
        ));
    }
    if !(sample_rate >= 4.0 * scenario.wingbeat_hz * sim.harmonic_orders as f64 && sample_rate > 0.0) {
        return Err(AcquisitionError::AliasedScenario {
            sample_rate,
            wingbeat_hz: scenario.wingbeat_hz,
            orders: sim.harmonic_orders,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    let duration = geometry.transit_duration(scenario.speed_mps)?;
    let entry = scenario.entry_time;
    let depth = scenario.body_shadow_depth;

    let t0 = (entry - sim.pre_margin_s).max(0.0);
    let t1 = entry + duration + sim.post_margin_s;
    let n = ((t1 - t0) * sample_rate).round() as usize;

    let amplitudes: Vec<f64> = (0..sim.harmonic_orders)
        .map(|k| sim.harmonic_power_decay.powf(k as f64 / 2.0))
        .collect();
    let phases: Vec<f64> = (0..sim.harmonic_orders)
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let noise_sigma = 10f64.powf(sim.noise_db / 20.0) * sim.wing_modulation * depth;
    let noise = Normal::new(0.0, noise_sigma).map_err(|_| AcquisitionError::InvalidConfig("noise level"))?;

    let mut photodiode = Vec::with_capacity(n);
    let mut beam = Vec::with_capacity(n);
    for i in 0..n {
        let t = t0 + i as f64 / sample_rate;
        let env = raised_cosine(t, entry, duration);
        let mut wings = 0.0;
        if env > 0.0 && scenario.wingbeat_hz > 0.0 {
            for (k, (a, ph)) in amplitudes.iter().zip(&phases).enumerate() {
                wings += a * (2.0 * PI * (k + 1) as f64 * scenario.wingbeat_hz * (t - entry) + ph).sin();
            }
        }
        let light = 1.0 - depth * env * (1.0 + sim.wing_modulation * wings);
        let v = sim.adc_gain * light + noise.sample(&mut rng);
        photodiode.push(v.clamp(-1.0, 1.0));
        beam.push(1.0 - sim.beam_occlusion * env);
    }
    let beam = TimeSeries::new(beam, sample_rate, t0)?;
    let photodiode = TimeSeries::new(photodiode, sample_rate, t0)?;
    let trigger_times = run_trigger(&beam, trigger)?;

    let period = 1.0 / sim.frame_rate_hz;
    let cam_start = (entry - sim.camera_margin_s).max(0.0) + rng.random_range(0.0..period);
    let cam_end = entry + duration + sim.camera_margin_s;
    let reflectance = rng.random_range(0.85..1.0);
    let flashes: Vec<f64> = trigger_times
        .iter()
        .flat_map(|t| (0..sim.strobe_frames).map(move |j| t + j as f64 * period))
        .collect();
    let spread = Normal::new(0.0, appearance.spread.max(0.0))
        .map_err(|_| AcquisitionError::InvalidConfig("appearance spread"))?;

    let mut frames = RingBuffer::new(sim.ring_capacity)?;
    let mut k = 0usize;
    loop {
        let open = cam_start + k as f64 * period;
        if open > cam_end {
            break;
        }
        let close = open + trigger.exposure_s;
        let lit: f64 = flashes
            .iter()
            .map(|f| overlap(*f, f + trigger.flash_duration_s, open, close))
            .sum::<f64>()
            / trigger.flash_duration_s;
        let jitter = sim.brightness_jitter * rng.random_range(-1.0..1.0);
        let brightness =
            (sim.ambient_brightness + jitter + sim.flash_gain * reflectance * lit).clamp(0.0, 1.0);
        let descriptor = appearance
            .prototype
            .iter()
            .map(|p| p + spread.sample(&mut rng))
            .collect();
        frames.push(Frame {
            timestamp: open + trigger.exposure_s / 2.0,
            mean_brightness: brightness,
            descriptor,
        })?;
        k += 1;
    }

    Ok(Transit {
        beam,
        photodiode,
        frames,
        trigger_times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::select_frames;
    use crate::dsp::{
        extract_harmonics, highpass_filter, remove_dc, welch_psd, DspError, HarmonicConfig,
        WelchConfig,
    };

    fn scenario(f: f64, speed: f64, seed: u64) -> TransitScenario {
        TransitScenario {
            species_id: "Apis mellifera".into(),
            entry_time: 10.0,
            speed_mps: speed,
            wingbeat_hz: f,
            body_shadow_depth: 0.5,
            rng_seed: seed,
        }
    }

    fn run(s: &TransitScenario) -> Transit {
        let sim = SimulationConfig::default();
        simulate_transit(
            s,
            &SensorGeometry::default(),
            &TriggerConfig::default(),
            &sim,
            96_000.0,
            &Appearance::from_key(&s.species_id, sim.descriptor_dim, 0.5),
        )
        .unwrap()
    }

    fn analyse(t: &Transit, band: (f64, f64)) -> Result<f64, DspError> {
        let x = highpass_filter(&remove_dc(&t.photodiode)?, 8.0)?;
        let psd = welch_psd(&x, &WelchConfig::default())?;
        let cfg = HarmonicConfig {
            search_band_hz: band,
            ..Default::default()
        };
        Ok(extract_harmonics(&psd, &cfg)?.fundamental_hz)
    }

    #[test]
    fn recovers_wingbeat() {
        let t = run(&scenario(300.0, 1.0, 1));
        let f = analyse(&t, (30.0, 1200.0)).unwrap();
        assert!((f - 300.0).abs() <= 96_000.0 / 8192.0, "{f}");
        assert!(t.photodiode.is_normalized());
        assert_eq!(t.trigger_times.len(), 1);
    }

    #[test]
    fn no_flapping_no_peak() {
        let t = run(&scenario(0.0, 1.0, 2));
        assert!(matches!(
            analyse(&t, (200.0, 600.0)),
            Err(DspError::NoPeak { .. })
        ));
    }

    #[test]
    fn deterministic() {
        let s = scenario(420.0, 0.8, 99);
        assert_eq!(run(&s), run(&s));
        let other = run(&TransitScenario { rng_seed: 100, ..s.clone() });
        assert_ne!(run(&s).photodiode, other.photodiode);
    }

    #[test]
    fn flash_frames_are_brightest() {
        let t = run(&scenario(250.0, 1.0, 5));
        let trig = t.trigger_times[0];
        let sel = select_frames(&t.frames, trig, 0.5, 3).unwrap();
        assert!(sel.iter().all(|f| f.mean_brightness > 0.4), "{sel:?}");
        assert!(sel.iter().all(|f| (f.timestamp - trig).abs() < 0.2));
        assert!(t.frames.len() <= 64);
    }

    #[test]
    fn trigger_near_transit_centre() {
        let s = scenario(250.0, 1.0, 5);
        let t = run(&s);
        let centre = s.entry_time + 0.03;
        assert!((t.trigger_times[0] - centre).abs() < 0.03);
    }

    #[test]
    fn aliasing_rejected() {
        let s = scenario(5000.0, 1.0, 1);
        let sim = SimulationConfig::default();
        let err = simulate_transit(
            &s,
            &SensorGeometry::default(),
            &TriggerConfig::default(),
            &sim,
            48_000.0,
            &Appearance::from_key("x", sim.descriptor_dim, 0.1),
        )
        .unwrap_err();
        assert!(matches!(err, AcquisitionError::AliasedScenario { .. }));
    }

    #[test]
    fn invalid_scenarios() {
        let mut s = scenario(300.0, 0.0, 1);
        assert!(s.validate().is_err());
        s.speed_mps = 1.0;
        s.body_shadow_depth = 0.0;
        assert!(s.validate().is_err());
        s.body_shadow_depth = 1.0;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn scenario_json_field_names() {
        let s = scenario(300.0, 1.0, 7);
        let json = serde_json::to_value(&s).unwrap();
        let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(
            keys,
            ["body_shadow_depth", "entry_time", "rng_seed", "species_id", "speed_mps", "wingbeat_hz"]
        );
    }

    #[test]
    fn appearance_is_stable() {
        let a = Appearance::from_key("Vespa crabro", 8, 0.1);
        let b = Appearance::from_key("Vespa crabro", 8, 0.1);
        assert_eq!(a, b);
        assert_ne!(a, Appearance::from_key("Vespa crabr0", 8, 0.1));
    }
}
