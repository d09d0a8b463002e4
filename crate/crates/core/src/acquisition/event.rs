use serde::{Deserialize, Serialize};

use super::{AcquisitionError, Frame};
use crate::dsp::TimeSeries;
use crate::env::EnvSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Wingbeat,
    Image,
}

/// Co-registered sensor data for one insect.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    pub event_id: String,
    pub trigger_time: f64,
    pub wingbeat: Option<TimeSeries>,
    /// Selected frames, brightest first.
    pub frames: Option<Vec<Frame>>,
    pub env: Option<EnvSnapshot>,
}

impl DetectionEvent {
    pub fn has(&self, modality: Modality) -> bool {
        match modality {
            Modality::Wingbeat => self.wingbeat.is_some(),
            Modality::Image => self.frames.as_ref().is_some_and(|f| !f.is_empty()),
        }
    }

    pub fn missing(&self) -> Vec<Modality> {
        [Modality::Wingbeat, Modality::Image]
            .into_iter()
            .filter(|m| !self.has(*m))
            .collect()
    }
}

/// Stable identifier derived from the trigger time in microseconds.
pub fn event_id_for(trigger_time: f64) -> String {
    format!("evt-{:016}", (trigger_time * 1e6).round() as u64)
}

/// Distance from `t` to the interval `[start, end]`.
fn gap(t: f64, start: f64, end: f64) -> f64 {
    if t < start {
        start - t
    } else if t > end {
        t - end
    } else {
        0.0
    }
}

/// Bundles the modalities whose timestamps fall within `window_s` of the
/// trigger. A wingbeat segment counts when any part of it is that close;
/// frames are kept individually.
pub fn co_register(
    trigger_time: f64,
    wingbeat: Option<TimeSeries>,
    frames: Option<Vec<Frame>>,
    env: Option<EnvSnapshot>,
    window_s: f64,
) -> Result<DetectionEvent, AcquisitionError> {
    if !(window_s >= 0.0) {
        return Err(AcquisitionError::InvalidConfig("co-registration window must be >= 0"));
    }
    let wingbeat = wingbeat
        .filter(|w| !w.is_empty() && gap(trigger_time, w.start_time(), w.end_time()) <= window_s);
    let frames = frames
        .map(|fs| {
            let mut kept: Vec<Frame> = fs
                .into_iter()
                .filter(|f| (f.timestamp - trigger_time).abs() <= window_s)
                .collect();
            kept.sort_by(|a, b| {
                b.mean_brightness
                    .total_cmp(&a.mean_brightness)
                    .then(a.timestamp.total_cmp(&b.timestamp))
            });
            kept
        })
        .filter(|fs| !fs.is_empty());
    let env = env.filter(|e| (e.timestamp - trigger_time).abs() <= window_s);
    if wingbeat.is_none() && frames.is_none() && env.is_none() {
        return Err(AcquisitionError::NoModalities);
    }
    Ok(DetectionEvent {
        event_id: event_id_for(trigger_time),
        trigger_time,
        wingbeat,
        frames,
        env,
    })
}
