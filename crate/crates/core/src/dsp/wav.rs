//! Mono PCM WAV ingestion and output.

use std::path::Path;

use super::{DspError, TimeSeries};

/// Reads a mono 16- or 24-bit PCM file, normalizing by full scale.
pub fn read_wav(path: impl AsRef<Path>, start_time: f64) -> Result<TimeSeries, DspError> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(DspError::MultiChannel(spec.channels));
    }
    if spec.sample_format != hound::SampleFormat::Int || !matches!(spec.bits_per_sample, 16 | 24) {
        return Err(DspError::UnsupportedWav(format!(
            "{:?} with {} bits per sample",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let full_scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
    let samples = reader
        .samples::<i32>()
        .map(|s| s.map(|v| v as f64 / full_scale))
        .collect::<Result<Vec<_>, _>>()?;
    TimeSeries::new(samples, spec.sample_rate as f64, start_time)
}

/// Writes `signal` as mono PCM with `bits` of 16 or 24, clipping at full scale.
pub fn write_wav(path: impl AsRef<Path>, signal: &TimeSeries, bits: u16) -> Result<(), DspError> {
    if !matches!(bits, 16 | 24) {
        return Err(DspError::UnsupportedWav(format!("{bits} bits per sample")));
    }
    let rate = signal.sample_rate();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(DspError::UnsupportedWav(format!("sample rate {rate}")));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: bits,
        sample_format: hound::SampleFormat::Int,
    };
    let max = ((1i64 << (bits - 1)) - 1) as f64;
    let mut writer = hound::WavWriter::create(path, spec)?;
    for s in signal.samples() {
        writer.write_sample((s * max).round().clamp(-max - 1.0, max) as i32)?;
    }
    writer.finalize()?;
    Ok(())
}
