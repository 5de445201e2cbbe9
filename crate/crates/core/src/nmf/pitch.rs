use realfft::num_complex::Complex;
use realfft::RealFftPlanner;

use super::stft::{check_framing, padded_frames};
use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::signal::Waveform;

/// Minimum normalized autocorrelation for a lag to count as periodic.
pub const VOICING_THRESHOLD: f64 = 0.2;
const MAX_CANDIDATES: usize = 2;

/// Frame size used for analysis at `sample_rate`: 2048 samples at 24 kHz, scaled to the nearest
/// power of two.
pub fn default_frame(sample_rate: u32) -> usize {
    let target = 2048.0 * sample_rate as f64 / 24000.0;
    let lo = (target.log2().floor() as u32).max(5);
    if target / 2f64.powi(lo as i32) < 2f64.powi(lo as i32 + 1) / target {
        1 << lo
    } else {
        1 << (lo + 1)
    }
}

/// Pitch candidates for every frame of the default framing (frame from [`default_frame`], hop
/// a quarter frame), aligned with the columns of [`super::stft`] under the same framing.
pub fn pitch_candidates<T: Real>(wave: &Waveform<T>, fmin: f64, fmax: f64) -> Result<Vec<Vec<f64>>> {
    let frame = default_frame(wave.sample_rate());
    pitch_candidates_framed(wave, fmin, fmax, frame, frame / 4)
}

/// Up to two f0 candidates per frame, strongest first.
///
/// The strongest periodicity is the shortest autocorrelation lag whose peak reaches 90% of the
/// highest peak in range. Its frequency is snapped to the nearest spectral peak, its harmonics
/// are notched out of the spectrum, and the search repeats on what remains.
pub fn pitch_candidates_framed<T: Real>(
    wave: &Waveform<T>,
    fmin: f64,
    fmax: f64,
    frame: usize,
    hop: usize,
) -> Result<Vec<Vec<f64>>> {
    check_framing(frame, hop)?;
    let rate = wave.sample_rate() as f64;
    ensure!(
        fmin > 0.0 && fmin < fmax && fmax <= rate / 2.0,
        Config,
        "pitch range [{fmin}, {fmax}] must be increasing and below Nyquist"
    );
    let min_len = (2.0 * rate / fmin).ceil() as usize;
    ensure!(
        wave.len() >= min_len,
        Domain,
        "signal of {} samples is too short for pitch analysis down to {fmin} Hz",
        wave.len()
    );
    let (p, count) = padded_frames(wave.samples(), frame, hop);
    let an = Analyzer::new(frame, rate, fmin, fmax);
    // windowed energy, so frames only touching the signal with their tails count as quiet
    let energies: Vec<f64> = (0..count)
        .map(|i| p[i * hop..i * hop + frame].iter().zip(&an.window).map(|(v, w)| (v * w).powi(2)).sum())
        .collect();
    let peak_energy = energies.iter().copied().fold(0.0, f64::max);
    Ok((0..count)
        .map(|i| {
            if energies[i] <= 0.05 * peak_energy || energies[i] < 1e-20
                {
                Vec::new()
            } else {
                an.frame(&p[i * hop..i * hop + frame])
            }
        })
        .collect())
}

struct Analyzer {
    n: usize,
    rate: f64,
    window: Vec<f64>,
    window_acf: Vec<f64>,
    lo: usize,
    hi: usize,
    fft: std::sync::Arc<dyn realfft::RealToComplex<f64>>,
    ifft: std::sync::Arc<dyn realfft::ComplexToReal<f64>>,
}

impl Analyzer {
    fn new(n: usize, rate: f64, fmin: f64, fmax: f64) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(2 * n);
        let ifft = planner.plan_fft_inverse(2 * n);
        let window: Vec<f64> = (0..n)
            .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * (i as f64 + 0.5) / n as f64).cos())
            .collect();
        let mut a = Self {
            n,
            rate,
            window: window.clone(),
            window_acf: Vec::new(),
            lo: ((rate / fmax).floor() as usize).max(2),
            hi: ((rate / fmin).ceil() as usize).min(n / 2),
            fft,
            ifft,
        };
        let spec = a.spectrum(&vec![1.0; n]);
        a.window_acf = a.acf(&spec);
        a
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex<f64>> {
        let mut input = self.fft.make_input_vec();
        for ((d, &s), &w) in input.iter_mut().zip(x).zip(&self.window) {
            *d = s * w;
        }
        let mut out = self.fft.make_output_vec();
        self.fft.process(&mut input, &mut out).expect("fft buffer sizes");
        out
    }

    fn acf(&self, spec: &[Complex<f64>]) -> Vec<f64> {
        let mut p: Vec<Complex<f64>> = spec.iter().map(|z| Complex::new(z.norm_sqr(), 0.0)).collect();
        let mut out = self.ifft.make_output_vec();
        self.ifft.process(&mut p, &mut out).expect("fft buffer sizes");
        out.truncate(self.n);
        out
    }

    fn bin_hz(&self) -> f64 {
        self.rate / (2 * self.n) as f64
    }

    fn frame(&self, x: &[f64]) -> Vec<f64> {
        let mut spec = self.spectrum(x);
        let total = spec.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let mut found: Vec<(f64, f64)> = Vec::new();
        while found.len() < MAX_CANDIDATES {
            let Some((f0, height)) = self.strongest(&spec, total) else { break };
            if found.iter().any(|(f, _)| (f0 / f).ln().abs() < 0.03) {
                break;
            }
            found.push((f0, height));
            self.notch(&mut spec, f0);
        }
        found.sort_by(|a, b| b.1.total_cmp(&a.1));
        found.into_iter().map(|c| c.0).collect()
    }

    /// Peak heights are normalized by `reference`, the energy of the un-notched frame, so
    /// leakage left after notching does not pass the voicing threshold.
    fn strongest(&self, spec: &[Complex<f64>], reference: f64) -> Option<(f64, f64)> {
        let raw = self.acf(spec);
        if raw[0] <= 1e-20 {
            return None;
        }
        let r: Vec<f64> = raw
            .iter()
            .zip(&self.window_acf)
            .map(|(&v, &w)| if w > 1e-9 { v / w } else { 0.0 })
            .collect();
        let r0 = r[0] * reference / spec.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let peaks: Vec<usize> = (self.lo.max(1)..self.hi.min(self.n - 1))
            .filter(|&l| r[l] > r[l - 1] && r[l] >= r[l + 1] && r[l] / r0 > VOICING_THRESHOLD)
            .collect();
        let best = peaks.iter().map(|&l| r[l]).fold(f64::NEG_INFINITY, f64::max);
        let l = *peaks.iter().find(|&&l| r[l] >= 0.9 * best)?;
        let (a, b, c) = (r[l - 1], r[l], r[l + 1]);
        let denom = a - 2.0 * b + c;
        let d = if denom.abs() > 1e-300 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        let coarse = self.rate / (l as f64 + d);
        Some((self.snap(spec, coarse), b / r0))
    }

    /// Moves `f0` to the largest spectral peak within ±15%, if that peak is interior.
    fn snap(&self, spec: &[Complex<f64>], f0: f64) -> f64 {
        let bw = self.bin_hz();
        let lo = ((0.85 * f0 / bw).floor() as usize).max(1);
        let hi = ((1.15 * f0 / bw).ceil() as usize).min(spec.len() - 2);
        if lo >= hi {
            return f0;
        }
        let mag: Vec<f64> = spec.iter().map(|z| z.norm()).collect();
        let k = (lo..=hi).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
        if k == lo || k == hi || mag[k] <= 0.0 {
            return f0;
        }
        let (a, b, c) = ((mag[k - 1] + 1e-300).ln(), mag[k].ln(), (mag[k + 1] + 1e-300).ln());
        let denom = a - 2.0 * b + c;
        let d = if denom.abs() > 1e-300 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        (k as f64 + d) * bw
    }

    fn notch(&self, spec: &mut [Complex<f64>], f0: f64) {
        let bw = self.bin_hz();
        let width = 0.125 * f0 + 4.0 * bw;
        for (i, z) in spec.iter_mut().enumerate() {
            let f = i as f64 * bw;
            let k = (f / f0).round();
            if k >= 1.0 && (f - k * f0).abs() < width {
                *z = Complex::new(0.0, 0.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tones(freqs: &[f64], n: usize) -> Waveform<f64> {
        let s = (0..n)
            .map(|t| freqs.iter().map(|f| (std::f64::consts::TAU * f * t as f64 / 8000.0).sin()).sum())
            .collect();
        Waveform::new(s, 8000).unwrap()
    }

    #[test]
    fn default_frame_scales_with_rate() {
        assert_eq!(default_frame(24000), 2048);
        assert_eq!(default_frame(8000), 512);
        assert_eq!(default_frame(16000), 1024);
    }

    #[test]
    fn pure_tone() {
        let c = pitch_candidates(&tones(&[220.0], 8000), 80.0, 1000.0).unwrap();
        let voiced: Vec<&Vec<f64>> = c.iter().filter(|v| !v.is_empty()).collect();
        assert!(voiced.len() > c.len() / 2);
        for v in voiced {
            assert!((v[0] / 220.0 - 1.0).abs() < 0.01, "{v:?}");
            assert!((v[0] / 220.0 - 1.0).abs() < 0.01, "{v:?}");
            assert_eq!(v.len(), 1);
        }
    }

    #[test]
    fn silence_has_no_candidates() {
        let c = pitch_candidates(&Waveform::new(vec![0.0f64; 4000], 8000).unwrap(), 80.0, 1000.0).unwrap();
        assert!(c.iter().all(|v| v.is_empty()));
        assert!(pitch_candidates(&Waveform::new(vec![0.1f64; 50], 8000).unwrap(), 80.0, 1000.0).is_err());
    }

    #[test]
    fn two_tones() {
        let c = pitch_candidates(&tones(&[220.0, 330.0], 8000), 150.0, 1000.0).unwrap();
        let near = |v: &Vec<f64>, f: f64| v.iter().any(|x| (x / f - 1.0).abs() < 0.02);
        let hits = c.iter().filter(|v| near(v, 220.0) && near(v, 330.0)).count();
        assert!(hits as f64 >= 0.8 * c.len() as f64, "{hits} of {}", c.len());
    }
}
