//! Sampled signals and the instantaneous mixing model.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng;
use crate::scalar::Real;

/// Mono sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T: Real> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Real> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        ensure!(sample_rate > 0, Config, "sample rate must be positive");
        ensure!(
            samples.iter().all(|s| s.is_finite()),
            Domain,
            "waveform contains non-finite samples"
        );
        Ok(Self { samples, sample_rate })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![T::zero(); len], sample_rate)
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn scaled(&self, gain: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn rms(&self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        (crate::scalar::energy(&self.samples) / T::of_usize(self.samples.len())).sqrt()
    }

    pub fn peak(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, s| m.max(s.abs()))
    }

    /// Copy of `[start, start + len)`, zero-filled past the end.
    pub fn window(&self, start: usize, len: usize) -> Self {
        let mut out = vec![T::zero(); len];
        if start < self.samples.len() {
            let end = (start + len).min(self.samples.len());
            out[..end - start].copy_from_slice(&self.samples[start..end]);
        }
        Self { samples: out, sample_rate: self.sample_rate }
    }

    pub fn padded_to(&self, len: usize) -> Self {
        self.window(0, len.max(self.len()))
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            samples: self.samples[..len.min(self.len())].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn cast<U: Real>(&self) -> Waveform<U> {
        Waveform {
            samples: self.samples.iter().map(|s| U::of(s.as_f64())).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingKind {
    /// Single channel, all-ones mixing vector.
    InstantaneousSum,
}

/// Linear mixing model `x = H s + z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingModel {
    pub kind: MixingKind,
    pub channels: usize,
    pub sources: usize,
    pub noise_variance: f64,
}

impl MixingModel {
    pub fn instantaneous_sum(sources: usize) -> Result<Self> {
        let m = Self {
            kind: MixingKind::InstantaneousSum,
            channels: 1,
            sources,
            noise_variance: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_noise_variance(mut self, variance: f64) -> Result<Self> {
        self.noise_variance = variance;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            MixingKind::InstantaneousSum => ensure!(
                self.channels == 1,
                Config,
                "instantaneous sum requires a single channel, got {}",
                self.channels
            ),
        }
        ensure!(self.sources >= 2, Config, "separation needs at least two sources");
        ensure!(
            self.noise_variance >= 0.0 && self.noise_variance.is_finite(),
            Config,
            "noise variance must be finite and nonnegative"
        );
        Ok(())
    }
}

/// An observed mixture together with the model that produced it.
#[derive(Debug, Clone)]
pub struct MixtureProblem<T: Real> {
    pub mixture: Waveform<T>,
    pub mixing: MixingModel,
}

impl<T: Real> MixtureProblem<T> {
    pub fn new(mixture: Waveform<T>, mixing: MixingModel) -> Result<Self> {
        ensure!(!mixture.is_empty(), Shape, "mixture is empty");
        mixing.validate()?;
        Ok(Self { mixture, mixing })
    }

    pub fn sources(&self) -> usize {
        self.mixing.sources
    }
}

/// Applies the mixing model to `sources`. Noise is drawn from `noise_seed` when the model has
/// nonzero measurement variance.
pub fn mix<T: Real>(
    sources: &[Waveform<T>],
    mixing: &MixingModel,
    noise_seed: Option<u64>,
) -> Result<Waveform<T>> {
    mixing.validate()?;
    ensure!(
        sources.len() == mixing.sources,
        Config,
        "mixing model expects {} sources, got {}",
        mixing.sources,
        sources.len()
    );
    let first = &sources[0];
    for s in sources {
        if s.len() != first.len() || s.sample_rate() != first.sample_rate() {
            return Err(Error::Shape(format!(
                "source shape ({} samples @ {} Hz) differs from ({} @ {})",
                s.len(),
                s.sample_rate(),
                first.len(),
                first.sample_rate()
            )));
        }
    }
    let mut out = vec![T::zero(); first.len()];
    for s in sources {
        for (o, &v) in out.iter_mut().zip(s.samples()) {
            *o += v;
        }
    }
    if mixing.noise_variance > 0.0 {
        let seed = noise_seed.ok_or_else(|| {
            Error::Config("a noise seed is required when the noise variance is positive".into())
        })?;
        let mut rng = rng::seeded(seed);
        let std = T::of(mixing.noise_variance.sqrt());
        for o in &mut out {
            *o += rng::standard_normal::<T, _>(&mut rng) * std;
        }
    }
    Waveform::new(out, first.sample_rate())
}
