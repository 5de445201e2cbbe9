use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Placement of fixed-length segments over a signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub segment_length: usize,
    pub overlap_ratio: f64,
    pub hop: usize,
    pub offsets: Vec<usize>,
    pub signal_length: usize,
    pub padded_length: usize,
}

impl SegmentPlan {
    pub fn overlap(&self) -> usize {
        self.segment_length - self.hop
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

pub fn plan_segments(signal_length: usize, segment_length: usize, overlap_ratio: f64) -> Result<SegmentPlan> {
    ensure!(segment_length >= 1, Config, "segment length must be positive");
    ensure!(
        (0.0..1.0).contains(&overlap_ratio),
        Config,
        "overlap ratio {overlap_ratio} outside [0, 1)"
    );
    ensure!(signal_length >= 1, Shape, "signal is empty");
    let hop = ((segment_length as f64 * (1.0 - overlap_ratio)).round() as usize).clamp(1, segment_length);
    let count = if signal_length <= segment_length {
        1
    } else {
        1 + (signal_length - segment_length).div_ceil(hop)
    };
    let offsets: Vec<usize> = (0..count).map(|j| j * hop).collect();
    let padded_length = offsets[count - 1] + segment_length;
    Ok(SegmentPlan { segment_length, overlap_ratio, hop, offsets, signal_length, padded_length })
}
