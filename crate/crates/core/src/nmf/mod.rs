//! Pitch-informed KL-NMF separation baseline.

mod fit;
mod pitch;
mod stft;

pub use fit::{kl_divergence, nmf_fit, nmf_step, NmfInit, NmfModel, NMF_EPS};
pub use pitch::{default_frame, pitch_candidates, pitch_candidates_framed, VOICING_THRESHOLD};
pub use stft::{hann, istft, stft, Spectrogram, Window};

use itertools::Itertools;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::signal::{MixtureProblem, Waveform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfOptions {
    pub components_per_source: usize,
    pub iterations: usize,
    pub seed: u64,
    /// STFT frame; `None` picks [`default_frame`] for the sample rate.
    pub frame: Option<usize>,
    /// STFT hop; `None` uses a quarter frame.
    pub hop: Option<usize>,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for NmfOptions {
    fn default() -> Self {
        Self { components_per_source: 8, iterations: 300, seed: 0, frame: None, hop: None, fmin: 80.0, fmax: 1000.0 }
    }
}

#[derive(Debug, Clone)]
pub struct NmfSeparation<T: Real> {
    pub sources: Vec<Waveform<T>>,
    pub model: NmfModel,
    /// True when no pitch candidates were found and the factors started at random.
    pub fallback: bool,
}

/// Splits per-frame candidates into `n` continuous pitch tracks, greedily matching each frame's
/// candidates to the tracks' last values by log-frequency distance.
pub fn track_pitches(candidates: &[Vec<f64>], n: usize) -> Vec<Vec<Option<f64>>> {
    let mut tracks = vec![vec![None; candidates.len()]; n];
    let mut last: Vec<Option<f64>> = vec![None; n];
    for (t, c) in candidates.iter().enumerate() {
        let c = &c[..c.len().min(n)];
        if c.is_empty() {
            continue;
        }
        let best = (0..n)
            .permutations(c.len())
            .map(|slots| {
                let cost: f64 = slots
                    .iter()
                    .zip(c)
                    .map(|(&s, &f)| last[s].map_or(0.5, |l: f64| (f / l).ln().abs()))
                    .sum();
                (cost, slots)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("at least one assignment")
            .1;
        for (&s, &f) in best.iter().zip(c) {
            tracks[s][t] = Some(f);
            last[s] = Some(f);
        }
    }
    tracks
}

/// Harmonic template: Hann bumps two bins wide at every multiple of `f0` below Nyquist, with
/// amplitude `1/k`. Bins away from the harmonics are exactly zero.
pub fn harmonic_template(f0: f64, frame: usize, sample_rate: u32) -> Vec<f64> {
    let bins = frame / 2 + 1;
    let bw = sample_rate as f64 / frame as f64;
    let half = 2.0 * bw;
    let nyq = sample_rate as f64 / 2.0;
    let mut w = vec![0.0; bins];
    let mut k = 1.0;
    while k * f0 < nyq {
        for (b, v) in w.iter_mut().enumerate() {
            let d = (b as f64 * bw - k * f0).abs();
            if d < half {
                *v += (0.5 + 0.5 * (std::f64::consts::PI * d / half).cos()) / k;
            }
        }
        k += 1.0;
    }
    w
}

/// Wiener masks `(W_i H_i + ε/n) / (W H + ε)`, which sum to one in every bin.
pub fn wiener_masks(model: &NmfModel, n: usize) -> Vec<Array2<f64>> {
    let total = model.reconstruction() + NMF_EPS;
    (0..n).map(|i| (model.source_part(i) + NMF_EPS / n as f64) / &total).collect()
}

pub fn separate_nmf<T: Real>(problem: &MixtureProblem<T>, opts: &NmfOptions) -> Result<NmfSeparation<T>> {
    let n = problem.sources();
    let c = opts.components_per_source;
    ensure!(c >= 1, Config, "need at least one component per source");
    let x = &problem.mixture;
    let frame = opts.frame.unwrap_or_else(|| default_frame(x.sample_rate()));
    let hop = opts.hop.unwrap_or(frame / 4);
    let spec = stft(x, frame, hop)?;
    let v = spec.magnitudes.clone();
    let frames = spec.frames();

    let candidates = pitch_candidates_framed(x, opts.fmin, opts.fmax, frame, hop)?;
    let tracks = track_pitches(&candidates, n);
    let any_pitch = tracks.iter().any(|t| t.iter().any(Option::is_some));
    let source_of_component: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat(i).take(c)).collect();

    let init = if any_pitch {
        let bins = spec.bins();
        let mut w = Array2::zeros((bins, n * c));
        let mut h = Array2::zeros((n * c, frames));
        for (i, track) in tracks.iter().enumerate() {
            let mut logs: Vec<f64> = track.iter().flatten().map(|f| f.ln()).collect();
            if logs.is_empty() {
                // a silent track gets templates spread over the pitch range, never active
                logs = vec![opts.fmin.ln(), opts.fmax.ln()];
            }
            logs.sort_by(f64::total_cmp);
            let centers: Vec<f64> = (0..c).map(|q| quantile(&logs, (q as f64 + 0.5) / c as f64).exp()).collect();
            for (q, &f0) in centers.iter().enumerate() {
                let col = i * c + q;
                for (b, val) in harmonic_template(f0, frame, x.sample_rate()).into_iter().enumerate() {
                    w[[b, col]] = val;
                }
            }
            for (t, f) in track.iter().enumerate() {
                if let Some(f) = f {
                    let q = (0..c)
                        .min_by(|&a, &b| (f / centers[a]).ln().abs().total_cmp(&(f / centers[b]).ln().abs()))
                        .expect("at least one component");
                    h[[i * c + q, t]] = 1.0;
                }
            }
        }
        NmfInit { w: Some(w), h: Some(h), source_of_component: Some(source_of_component) }
    } else {
        log::warn!("no pitch candidates found; NMF starts from random factors");
        NmfInit { w: None, h: None, source_of_component: Some(source_of_component) }
    };

    let model = nmf_fit(&v, n * c, opts.iterations, opts.seed, init)?;
    let z = spec.complex();
    let sources = wiener_masks(&model, n)
        .iter()
        .map(|m| istft(&spec.with_complex(&(&z * &m.mapv(|v| realfft::num_complex::Complex::new(v, 0.0))))))
        .collect::<Result<_>>()?;
    Ok(NmfSeparation { sources, model, fallback: !any_pitch })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
