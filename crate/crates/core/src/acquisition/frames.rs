use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::AcquisitionError;

/// A camera frame reduced to its mean brightness and an appearance
/// descriptor. Pixels are never materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    /// Centre of the exposure, in seconds.
    pub timestamp: f64,
    pub mean_brightness: f64,
    pub descriptor: Vec<f64>,
}

/// Fixed-capacity frame store; the oldest frame is evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct RingBuffer {
    capacity: usize,
    frames: VecDeque<Frame>,
}

impl RingBuffer {
    pub fn new(capacity: usize) -> Result<Self, AcquisitionError> {
        if capacity == 0 {
            return Err(AcquisitionError::InvalidConfig("ring buffer capacity must be >= 1"));
        }
        Ok(Self {
            capacity,
            frames: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, frame: Frame) -> Result<(), AcquisitionError> {
        if let Some(last) = self.frames.back() {
            if !(frame.timestamp > last.timestamp) {
                return Err(AcquisitionError::NonMonotonicFrame {
                    timestamp: frame.timestamp,
                });
            }
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        Ok(())
    }

    /// Frames from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter()
    }
}

/// Picks the `k` brightest frames within `window_s` of the trigger.
///
/// Output is ordered by descending brightness; ties go to the earlier frame.
pub fn select_frames(
    buffer: &RingBuffer,
    trigger_time: f64,
    window_s: f64,
    k: usize,
) -> Result<Vec<Frame>, AcquisitionError> {
    if k == 0 {
        return Err(AcquisitionError::InvalidConfig("k must be >= 1"));
    }
    if !(window_s > 0.0) {
        return Err(AcquisitionError::InvalidConfig("window must be positive"));
    }
    let mut candidates: Vec<&Frame> = buffer
        .iter()
        .filter(|f| (f.timestamp - trigger_time).abs() <= window_s)
        .collect();
    if candidates.len() < k {
        return Err(AcquisitionError::InsufficientFrames {
            found: candidates.len(),
            needed: k,
        });
    }
    candidates.sort_by(|a, b| {
        b.mean_brightness
            .total_cmp(&a.mean_brightness)
            .then(a.timestamp.total_cmp(&b.timestamp))
    });
    Ok(candidates.into_iter().take(k).cloned().collect())
}
