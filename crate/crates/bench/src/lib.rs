//! Deterministic inputs shared by the benchmarks.

use wingfuse_core::acquisition::TransitScenario;
use wingfuse_core::dsp::{TimeSeries, NOMINAL_SAMPLE_RATE};
use wingfuse_core::{FeatureVector, Modality, TaxonLabel};

/// Sum of a tone and two overtones with a small deterministic dither.
pub fn wingbeat_signal(hz: f64, seconds: f64) -> TimeSeries {
    let fs = NOMINAL_SAMPLE_RATE;
    let n = (fs * seconds) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let w = 2.0 * std::f64::consts::PI * hz * t;
            let dither = ((i * 7919) % 1000) as f64 * 1e-6;
            0.4 * w.sin() + 0.2 * (2.0 * w).sin() + 0.1 * (3.0 * w).sin() + dither
        })
        .collect();
    TimeSeries::new(samples, fs, 0.0).expect("valid signal")
}

pub fn scenario(seed: u64) -> TransitScenario {
    TransitScenario {
        species_id: "Apis mellifera".into(),
        entry_time: 10.0,
        speed_mps: 1.0,
        wingbeat_hz: 230.0,
        body_shadow_depth: 0.3,
        rng_seed: seed,
    }
}

/// `classes` evenly jittered blobs on a ring in `dim` dimensions.
pub fn blobs(classes: usize, per_class: usize, dim: usize) -> (Vec<FeatureVector>, Vec<TaxonLabel>) {
    let mut xs = Vec::with_capacity(classes * per_class);
    let mut ys = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let angle = c as f64 * std::f64::consts::TAU / classes as f64;
        for i in 0..per_class {
            let jitter = (i as f64 / per_class as f64) - 0.5;
            let values = (0..dim)
                .map(|d| match d {
                    0 => 5.0 * angle.cos() + jitter,
                    1 => 5.0 * angle.sin() - jitter,
                    _ => jitter * (d as f64).sin(),
                })
                .collect();
            xs.push(FeatureVector::new(values, Modality::Wingbeat));
            ys.push(TaxonLabel::new("Order", "Family", &format!("Genus{c}"), "sp"));
        }
    }
    (xs, ys)
}
