use ndarray::Array2;
use realfft::num_complex::Complex;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Window {
    #[default]
    Hann,
}

/// Magnitude/phase short-time spectrum (`bins × frames`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub phases: Array2<f64>,
    pub frame_size: usize,
    pub hop_size: usize,
    pub window: Window,
    pub signal_length: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn frames(&self) -> usize {
        self.magnitudes.ncols()
    }

    pub fn complex(&self) -> Array2<Complex<f64>> {
        ndarray::Zip::from(&self.magnitudes)
            .and(&self.phases)
            .map_collect(|&m, &p| Complex::from_polar(m, p))
    }

    /// Same framing, new complex content.
    pub fn with_complex(&self, z: &Array2<Complex<f64>>) -> Self {
        Self {
            magnitudes: z.mapv(|c| c.norm()),
            phases: z.mapv(|c| c.arg()),
            ..self.clone()
        }
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos()).collect()
}

pub(crate) fn check_framing(frame: usize, hop: usize) -> Result<()> {
    ensure!(frame >= 2 && frame.is_power_of_two(), Config, "frame size {frame} must be a power of two");
    ensure!(hop >= 1 && hop <= frame / 2, Config, "hop {hop} must be in [1, frame/2] for a Hann window");
    Ok(())
}

/// The signal zero-padded by one frame on each side; frame `i` starts at `i·hop` in it.
pub(crate) fn padded_frames<T: Real>(x: &[T], frame: usize, hop: usize) -> (Vec<f64>, usize) {
    let mut p = vec![0.0; x.len() + 2 * frame];
    for (d, s) in p[frame..].iter_mut().zip(x) {
        *d = s.as_f64();
    }
    let count = (p.len() - frame) / hop + 1;
    (p, count)
}

pub fn stft<T: Real>(wave: &Waveform<T>, frame: usize, hop: usize) -> Result<Spectrogram> {
    check_framing(frame, hop)?;
    ensure!(!wave.is_empty(), Shape, "cannot analyze an empty signal");
    let (p, count) = padded_frames(wave.samples(), frame, hop);
    let w = hann(frame);
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(frame);
    let bins = frame / 2 + 1;
    let mut magnitudes = Array2::zeros((bins, count));
    let mut phases = Array2::zeros((bins, count));
    let mut input = fft.make_input_vec();
    let mut spec = fft.make_output_vec();
    for i in 0..count {
        let o = i * hop;
        for ((d, &s), &wv) in input.iter_mut().zip(&p[o..o + frame]).zip(&w) {
            *d = s * wv;
        }
        fft.process(&mut input, &mut spec).expect("fft buffer sizes");
        for (b, z) in spec.iter().enumerate() {
            magnitudes[[b, i]] = z.norm();
            phases[[b, i]] = z.arg();
        }
    }
    Ok(Spectrogram {
        magnitudes,
        phases,
        frame_size: frame,
        hop_size: hop,
        window: Window::Hann,
        signal_length: wave.len(),
        sample_rate: wave.sample_rate(),
    })
}

/// Weighted overlap-add inverse, normalized by the summed squared window.
pub fn istft<T: Real>(spec: &Spectrogram) -> Result<Waveform<T>> {
    let (n, hop) = (spec.frame_size, spec.hop_size);
    check_framing(n, hop)?;
    ensure!(spec.bins() == n / 2 + 1, Shape, "spectrogram has {} bins for frame {n}", spec.bins());
    let total = (spec.frames() - 1) * hop + n;
    let w = hann(n);
    let ifft = RealFftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut out = vec![0.0; total];
    let mut norm = vec![0.0; total];
    let mut input = ifft.make_input_vec();
    let mut frame = ifft.make_output_vec();
    let z = spec.complex();
    for i in 0..spec.frames() {
        for (d, s) in input.iter_mut().zip(z.column(i)) {
            *d = *s;
        }
        input[0].im = 0.0;
        input[n / 2].im = 0.0;
        ifft.process(&mut input, &mut frame).expect("fft buffer sizes");
        let o = i * hop;
        for t in 0..n {
            out[o + t] += frame[t] / n as f64 * w[t];
            norm[o + t] += w[t] * w[t];
        }
    }
    let samples = (n..n + spec.signal_length)
        .map(|t| T::of(if norm[t] > 1e-12 { out[t] / norm[t] } else { 0.0 }))
        .collect();
    Waveform::new(samples, spec.sample_rate)
}
