use super::SegmentPlan;
use crate::error::{ensure, Result};
use crate::scalar::Real;

/// Width of the linear crossfade at each segment junction.
pub fn crossfade_width(plan: &SegmentPlan) -> usize {
    (plan.overlap() / 4).min(256).min(plan.hop)
}

/// Merges per-segment source estimates (`segments[j][i]` is source `i` of segment `j`) into
/// full-length sources truncated to the plan's signal length. Each junction sits at the middle
/// of the overlap, with earlier segments owning the samples before it.
pub fn stitch<T: Real>(segments: &[Vec<Vec<T>>], plan: &SegmentPlan) -> Result<Vec<Vec<T>>> {
    ensure!(
        segments.len() == plan.len(),
        Shape,
        "{} segment outputs for a plan with {} segments",
        segments.len(),
        plan.len()
    );
    let n = segments[0].len();
    let l = plan.segment_length;
    for seg in segments {
        ensure!(seg.len() == n, Shape, "segments differ in source count");
        ensure!(seg.iter().all(|s| s.len() == l), Shape, "segment output length differs from {l}");
    }
    let w = crossfade_width(plan);
    let mut out = vec![vec![T::zero(); plan.padded_length]; n];
    let junction = |j: usize| plan.offsets[j] + (plan.hop + l) / 2;
    for (j, seg) in segments.iter().enumerate() {
        let o = plan.offsets[j];
        let start = if j == 0 { 0 } else { junction(j - 1) - w / 2 };
        let end = if j + 1 == plan.len() { o + l } else { junction(j) - w / 2 + w };
        let fade_in = if j == 0 { None } else { Some(junction(j - 1) - w / 2) };
        let fade_out = if j + 1 == plan.len() { None } else { Some(junction(j) - w / 2) };
        for t in start..end {
            let mut g = T::one();
            if let Some(a0) = fade_in {
                if t < a0 + w {
                    g = T::of((t - a0) as f64 + 0.5) / T::of_usize(w);
                }
            }
            if let Some(b0) = fade_out {
                if t >= b0 {
                    g = T::one() - T::of((t - b0) as f64 + 0.5) / T::of_usize(w);
                }
            }
            for (dst, src) in out.iter_mut().zip(seg) {
                dst[t] += g * src[t - o];
            }
        }
    }
    for s in &mut out {
        s.truncate(plan.signal_length);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::plan_segments;

    #[test]
    fn disjoint_is_concatenation() {
        let plan = plan_segments(10, 4, 0.0).unwrap();
        let segs: Vec<Vec<Vec<f64>>> =
            (0..3).map(|j| vec![(0..4).map(|t| (j * 4 + t) as f64).collect()]).collect();
        let out = stitch(&segs, &plan).unwrap();
        assert_eq!(out[0], (0..10).map(|v| v as f64).collect::<Vec<_>>());
    }

    #[test]
    fn identical_overlaps_pass_through() {
        let plan = plan_segments(4000, 2048, 0.75).unwrap();
        let signal: Vec<f64> = (0..plan.padded_length).map(|t| (t as f64 * 0.01).sin()).collect();
        let segs: Vec<Vec<Vec<f64>>> =
            plan.offsets.iter().map(|&o| vec![signal[o..o + 2048].to_vec()]).collect();
        let out = stitch(&segs, &plan).unwrap();
        for (a, b) in out[0].iter().zip(&signal) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_discontinuity_is_ramped() {
        let plan = plan_segments(3000, 2048, 0.5).unwrap();
        let segs: Vec<Vec<Vec<f64>>> = (0..plan.len()).map(|j| vec![vec![j as f64; 2048]]).collect();
        let out = stitch(&segs, &plan).unwrap();
        let w = crossfade_width(&plan) as f64;
        assert_eq!(w, 256.0);
        let max_jump = out[0].windows(2).map(|p| (p[1] - p[0]).abs()).fold(0.0, f64::max);
        assert!(max_jump <= 1.0 / w + 1e-12);
        assert_eq!(out[0][0], 0.0);
        assert_eq!(*out[0].last().unwrap(), 1.0);
    }

    #[test]
    fn shape_errors() {
        let plan = plan_segments(8, 4, 0.0).unwrap();
        assert!(stitch(&[vec![vec![0.0; 4]]], &plan).is_err());
        assert!(stitch(&[vec![vec![0.0; 4]], vec![vec![0.0; 3]]], &plan).is_err());
    }
}
