use realfft::RealFftPlanner;

use crate::error::{ensure, Result};
use crate::scalar::Real;

pub const ENVELOPE_FFT: usize = 1024;
pub const ENVELOPE_BANDS: usize = 24;

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * (i as f64 + 0.5) / n as f64).cos())
        .collect()
}

/// Triangular filters with centers evenly spaced over the one-sided spectrum.
fn filter_bank(bins: usize) -> Vec<Vec<f64>> {
    let step = (bins - 1) as f64 / (ENVELOPE_BANDS + 1) as f64;
    (1..=ENVELOPE_BANDS)
        .map(|b| {
            let c = b as f64 * step;
            (0..bins).map(|k| (1.0 - (k as f64 - c).abs() / step).max(0.0)).collect()
        })
        .collect()
}

/// Gain-normalized log spectral envelope of one frame, averaging power over 1024-point Hann
/// blocks with half overlap (a single zero-padded block for short frames).
fn frame_envelope<T: Real>(
    frame: &[T],
    fft: &dyn realfft::RealToComplex<f64>,
    window: &[f64],
    bank: &[Vec<f64>],
) -> (Vec<f64>, f64) {
    let n = ENVELOPE_FFT;
    let bins = n / 2 + 1;
    let mut power = vec![0.0; bins];
    let mut input = fft.make_input_vec();
    let mut spec = fft.make_output_vec();
    let starts: Vec<usize> = if frame.len() <= n {
        vec![0]
    } else {
        (0..=(frame.len() - n) / (n / 2)).map(|b| b * n / 2).collect()
    };
    for &s in &starts {
        let block = &frame[s..(s + n).min(frame.len())];
        input.iter_mut().for_each(|v| *v = 0.0);
        let w = if block.len() == n { window.to_vec() } else { hann(block.len()) };
        for ((i, &x), &wv) in input.iter_mut().zip(block).zip(&w) {
            *i = x.as_f64() * wv;
        }
        fft.process(&mut input, &mut spec).expect("fft buffer sizes");
        for (p, z) in power.iter_mut().zip(&spec) {
            *p += z.norm_sqr();
        }
    }
    let total: f64 = power.iter().sum();
    let floor = 1e-10 * total.max(1e-300);
    let mut env: Vec<f64> =
        bank.iter().map(|f| (f.iter().zip(&power).map(|(a, b)| a * b).sum::<f64>() + floor).ln()).collect();
    let m = env.iter().sum::<f64>() / env.len() as f64;
    env.iter_mut().for_each(|v| *v -= m);
    (env, total)
}

/// Envelope features of consecutive non-overlapping frames of `frame` samples, together with
/// each frame's spectral energy.
pub fn envelope_features<T: Real>(samples: &[T], frame: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    ensure!(frame >= 1, Config, "frame length must be positive");
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(ENVELOPE_FFT);
    let window = hann(ENVELOPE_FFT);
    let bank = filter_bank(ENVELOPE_FFT / 2 + 1);
    Ok(samples.chunks_exact(frame).map(|f| frame_envelope(f, fft.as_ref(), &window, &bank)).collect())
}

/// Mean envelope over all frames of the given recordings of one identity.
pub fn envelope_prototype<T: Real>(recordings: &[&[T]], frame: usize) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; ENVELOPE_BANDS];
    let mut count = 0usize;
    for r in recordings {
        for (env, energy) in envelope_features(r, frame)? {
            if energy > 0.0 {
                acc.iter_mut().zip(&env).for_each(|(a, e)| *a += e);
                count += 1;
            }
        }
    }
    ensure!(count > 0, Domain, "no non-silent frames to build a prototype from");
    acc.iter_mut().for_each(|a| *a /= count as f64);
    Ok(acc)
}

fn nearest(env: &[f64], prototypes: &[Vec<f64>]) -> usize {
    let d = |p: &Vec<f64>| p.iter().zip(env).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let mut best = 0;
    for (i, p) in prototypes.iter().enumerate().skip(1) {
        if d(p) < d(&prototypes[best]) {
            best = i;
        }
    }
    best
}

/// Fraction of adjacent frames whose nearest identity prototype changes, averaged over the
/// estimates. Frames with less than 1e-6 of the estimate's mean frame energy are skipped.
pub fn identity_switch_rate<T: Real>(estimates: &[&[T]], prototypes: &[Vec<f64>], frame: usize) -> Result<f64> {
    ensure!(!estimates.is_empty(), Shape, "no estimates given");
    ensure!(prototypes.len() >= 2, Config, "at least two identity prototypes are required");
    ensure!(
        prototypes.iter().all(|p| p.len() == ENVELOPE_BANDS),
        Shape,
        "prototypes must have {ENVELOPE_BANDS} bands"
    );
    let mut total = 0.0;
    for e in estimates {
        let feats = envelope_features(e, frame)?;
        ensure!(feats.len() >= 2, Domain, "need at least two frames, got {}", feats.len());
        let mean_energy = feats.iter().map(|f| f.1).sum::<f64>() / feats.len() as f64;
        let labels: Vec<usize> = feats
            .iter()
            .filter(|f| f.1 > 1e-6 * mean_energy)
            .map(|f| nearest(&f.0, prototypes))
            .collect();
        if labels.len() >= 2 {
            let flips = labels.windows(2).filter(|w| w[0] != w[1]).count();
            total += flips as f64 / (labels.len() - 1) as f64;
        }
    }
    Ok(total / estimates.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(partials: &[f64], f0: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / 8000.0;
                partials
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * (std::f64::consts::TAU * f0 * (k + 1) as f64 * t).sin())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn constant_and_alternating_assignments() {
        let bright = tone(&[1.0, 0.0, 0.8, 0.0, 0.6, 0.0, 0.5], 300.0, 8192);
        let dark = tone(&[1.0, 0.7, 0.3], 300.0, 8192);
        let pa = envelope_prototype(&[&bright[..]], 1024).unwrap();
        let pb = envelope_prototype(&[&dark[..]], 1024).unwrap();
        let protos = vec![pa, pb];
        assert_eq!(identity_switch_rate(&[&bright[..]], &protos, 1024).unwrap(), 0.0);
        let alt: Vec<f64> = (0..8192).map(|i| if (i / 1024) % 2 == 0 { bright[i] } else { 0.5 * dark[i] }).collect();
        assert_eq!(identity_switch_rate(&[&alt[..]], &protos, 1024).unwrap(), 1.0);
        assert!(identity_switch_rate(&[&bright[..1500]], &protos, 1024).is_err());
    }
}
