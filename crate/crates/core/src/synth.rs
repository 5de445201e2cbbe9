//! Synthetic duet voices: parametric singers, pitch contours, scenarios and exemplar banks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::rng::{self, derive_seed};
use crate::scalar::Real;
use crate::score::ExemplarBank;
use crate::signal::Waveform;

/// Timbre and vibrato of one synthetic singer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingerSpec {
    pub name: String,
    /// Amplitude of partial `k + 1`.
    pub partial_amplitudes: Vec<f64>,
    pub vibrato_rate: f64,
    /// Peak vibrato excursion in cents.
    pub vibrato_depth: f64,
    pub base_gain: f64,
}

impl SingerSpec {
    /// Odd-partial-heavy timbre.
    pub fn bright() -> Self {
        Self {
            name: "bright".into(),
            partial_amplitudes: vec![1.0, 0.05, 0.8, 0.05, 0.6, 0.05, 0.45, 0.05, 0.3],
            vibrato_rate: 5.0,
            vibrato_depth: 30.0,
            base_gain: 1.0,
        }
    }

    /// Energy concentrated in the lowest partials.
    pub fn dark() -> Self {
        Self {
            name: "dark".into(),
            partial_amplitudes: vec![1.0, 0.7, 0.35, 0.15, 0.05, 0.02],
            vibrato_rate: 5.5,
            vibrato_depth: 30.0,
            base_gain: 1.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "bright" => Some(Self::bright()),
            "dark" => Some(Self::dark()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.partial_amplitudes.iter().all(|&a| a >= 0.0 && a.is_finite()),
            Config,
            "partial amplitudes must be finite and nonnegative"
        );
        ensure!(self.partial_amplitudes.iter().any(|&a| a > 0.0), Config, "singer has no nonzero partial");
        ensure!(self.vibrato_depth >= 0.0, Config, "vibrato depth must be nonnegative");
        ensure!(self.vibrato_rate >= 0.0, Config, "vibrato rate must be nonnegative");
        ensure!(self.base_gain > 0.0, Config, "base gain must be positive");
        Ok(())
    }

    /// Highest partial index with nonzero amplitude (1-based).
    pub fn top_partial(&self) -> usize {
        self.partial_amplitudes.iter().rposition(|&a| a > 0.0).map_or(0, |i| i + 1)
    }
}

/// Piecewise-linear f0 track in Hz over seconds, held constant outside its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub times: Vec<f64>,
    pub freqs: Vec<f64>,
}

impl Contour {
    pub fn new(times: Vec<f64>, freqs: Vec<f64>) -> Result<Self> {
        ensure!(!times.is_empty() && times.len() == freqs.len(), Shape, "contour needs matching knots");
        ensure!(times.windows(2).all(|w| w[0] < w[1]), Config, "contour times must increase");
        ensure!(freqs.iter().all(|&f| f > 0.0 && f.is_finite()), Config, "contour frequencies must be positive");
        Ok(Self { times, freqs })
    }

    pub fn constant(f0: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![f0])
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&k| k <= t);
        if i == 0 {
            return self.freqs[0];
        }
        if i == self.times.len() {
            return self.freqs[i - 1];
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let a = (t - t0) / (t1 - t0);
        self.freqs[i - 1] + a * (self.freqs[i] - self.freqs[i - 1])
    }

    pub fn max(&self) -> f64 {
        self.freqs.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.freqs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

const FADE_SECS: f64 = 0.01;

/// Additive harmonic synthesis with vibrato, a slow amplitude swell and short fades, peak
/// normalized to `0.5·base_gain`. The seed sets the vibrato and swell phases.
pub fn render_voice<T: Real>(
    spec: &SingerSpec,
    contour: &Contour,
    sample_rate: u32,
    duration: f64,
    seed: u64,
) -> Result<Waveform<T>> {
    spec.validate()?;
    ensure!(sample_rate > 0, Config, "sample rate must be positive");
    let n = (duration * sample_rate as f64).round() as usize;
    ensure!(duration > 0.0 && n > 0, Config, "duration {duration} s renders no samples");
    let fs = sample_rate as f64;
    let vib_peak = 2f64.powf(spec.vibrato_depth / 1200.0);
    let top = spec.top_partial() as f64;
    ensure!(
        contour.max() * vib_peak * top < fs / 2.0,
        Config,
        "contour peak {:.1} Hz times {} partials exceeds Nyquist",
        contour.max(),
        top
    );
    let mut r = rng::seeded(seed);
    let vib_phase = r.gen_range(0.0..std::f64::consts::TAU);
    let swell_phase = r.gen_range(0.0..std::f64::consts::TAU);
    let fade = (FADE_SECS * fs).round().max(1.0);
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let cents = spec.vibrato_depth * (std::f64::consts::TAU * spec.vibrato_rate * t + vib_phase).sin();
        let f0 = contour.at(t) * 2f64.powf(cents / 1200.0);
        let mut y: f64 = spec
            .partial_amplitudes
            .iter()
            .enumerate()
            .map(|(k, &a)| a * ((k + 1) as f64 * phase).sin())
            .sum();
        y *= 1.0 + 0.1 * (std::f64::consts::TAU * 0.7 * t + swell_phase).sin();
        y *= (i as f64 / fade).min((n - 1 - i) as f64 / fade).min(1.0);
        out.push(y);
        phase = (phase + std::f64::consts::TAU * f0 / fs) % std::f64::consts::TAU;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let g = if peak > 0.0 { 0.5 * spec.base_gain / peak } else { 0.0 };
    Waveform::new(out.into_iter().map(|v| T::of(v * g)).collect(), sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// One rising and one falling contour that cross.
    Crossing,
    /// Contours a major third apart.
    Parallel,
    /// Crossing contours sung by the same singer.
    SameSinger,
}

impl std::str::FromStr for ScenarioKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "crossing" => Ok(Self::Crossing),
            "parallel" => Ok(Self::Parallel),
            "same-singer" => Ok(Self::SameSinger),
            other => Err(crate::Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuetScenario {
    pub kind: ScenarioKind,
    pub singers: [SingerSpec; 2],
    pub contours: [Contour; 2],
    pub duration: f64,
    pub crossing_times: Vec<f64>,
    pub seed: u64,
}

/// Lowest and highest f0 used by generated contours.
pub const CONTOUR_RANGE: (f64, f64) = (140.0, 400.0);

fn crossing_contours(r: &mut impl Rng, duration: f64) -> ([Contour; 2], Vec<f64>) {
    let lo = r.gen_range(150.0..200.0);
    let hi = r.gen_range(300.0..380.0);
    let (a0, a1) = (lo, hi);
    let (b0, b1) = (hi * 0.95, lo * 1.05);
    let a = Contour::new(vec![0.0, duration], vec![a0, a1]).expect("valid knots");
    let b = Contour::new(vec![0.0, duration], vec![b0, b1]).expect("valid knots");
    // a(t) - b(t) is linear, so there is exactly one crossing
    let t = duration * (b0 - a0) / ((a1 - a0) - (b1 - b0));
    if r.gen_bool(0.5) {
        ([b, a], vec![t])
    } else {
        ([a, b], vec![t])
    }
}

pub fn make_scenario(kind: ScenarioKind, duration: f64, seed: u64) -> Result<DuetScenario> {
    ensure!(duration >= 2.0, Config, "scenarios need at least 2 s, got {duration}");
    let mut r = rng::seeded(derive_seed(seed, &[0x5ce]));
    let (singers, contours, crossing_times) = match kind {
        ScenarioKind::Crossing => {
            let (c, t) = crossing_contours(&mut r, duration);
            ([SingerSpec::bright(), SingerSpec::dark()], c, t)
        }
        ScenarioKind::SameSinger => {
            let (c, t) = crossing_contours(&mut r, duration);
            ([SingerSpec::bright(), SingerSpec::bright()], c, t)
        }
        ScenarioKind::Parallel => {
            let third = 2f64.powf(4.0 / 12.0);
            let knots = (duration.ceil() as usize).max(1) + 1;
            let times: Vec<f64> = (0..knots).map(|k| duration * k as f64 / (knots - 1) as f64).collect();
            let top = CONTOUR_RANGE.1 / third;
            let low: Vec<f64> = (0..knots).map(|_| r.gen_range(CONTOUR_RANGE.0..top)).collect();
            let high = low.iter().map(|f| f * third).collect();
            (
                [SingerSpec::bright(), SingerSpec::dark()],
                [Contour::new(times.clone(), low)?, Contour::new(times, high)?],
                Vec::new(),
            )
        }
    };
    Ok(DuetScenario { kind, singers, contours, duration, crossing_times, seed })
}

/// Renders both voices of `scenario`.
pub fn render_scenario<T: Real>(scenario: &DuetScenario, sample_rate: u32) -> Result<[Waveform<T>; 2]> {
    let voice = |i: usize| {
        render_voice(
            &scenario.singers[i],
            &scenario.contours[i],
            sample_rate,
            scenario.duration,
            derive_seed(scenario.seed, &[1, i as u64]),
        )
    };
    Ok([voice(0)?, voice(1)?])
}

/// A random phrase contour: knots every half second, log-uniform over [`CONTOUR_RANGE`].
pub fn random_contour(r: &mut impl Rng, duration: f64) -> Contour {
    let knots = ((duration / 0.5).ceil() as usize).max(1) + 1;
    let (lo, hi) = (CONTOUR_RANGE.0.ln(), CONTOUR_RANGE.1.ln());
    let times = (0..knots).map(|k| duration * k as f64 / (knots - 1) as f64).collect();
    let freqs = (0..knots).map(|_| r.gen_range(lo..hi).exp()).collect();
    Contour::new(times, freqs).expect("valid knots")
}

/// Length of each phrase rendered for exemplar banks.
pub const BANK_PHRASE_SECS: f64 = 1.0;
const SLICES_PER_PHRASE: usize = 8;

/// Renders varied phrases for each singer and cuts `count_per_singer` random RMS-normalized
/// slices of `segment_length` samples from them, labelled by singer.
pub fn build_exemplar_bank<T: Real>(
    specs: &[SingerSpec],
    segment_length: usize,
    count_per_singer: usize,
    sample_rate: u32,
    seed: u64,
) -> Result<ExemplarBank<T>> {
    ensure!(!specs.is_empty(), Config, "no singers given");
    ensure!(count_per_singer >= 1, Config, "count per singer must be at least 1");
    let phrase_len = (BANK_PHRASE_SECS * sample_rate as f64).round() as usize;
    ensure!(
        segment_length >= 1 && segment_length <= phrase_len,
        Config,
        "segment length {segment_length} exceeds the {phrase_len}-sample phrases"
    );
    let mut exemplars = Vec::with_capacity(specs.len() * count_per_singer);
    let mut labels = Vec::with_capacity(exemplars.capacity());
    for (s, spec) in specs.iter().enumerate() {
        let mut r = rng::seeded(derive_seed(seed, &[s as u64]));
        let mut got = 0;
        let mut phrase_idx = 0u64;
        while got < count_per_singer {
            let contour = random_contour(&mut r, BANK_PHRASE_SECS);
            let phrase: Waveform<f64> = render_voice(
                spec,
                &contour,
                sample_rate,
                BANK_PHRASE_SECS,
                derive_seed(seed, &[s as u64, phrase_idx]),
            )?;
            phrase_idx += 1;
            for _ in 0..SLICES_PER_PHRASE {
                if got == count_per_singer {
                    break;
                }
                let o = r.gen_range(0..=phrase_len - segment_length);
                let slice = &phrase.samples()[o..o + segment_length];
                let rms = (slice.iter().map(|v| v * v).sum::<f64>() / segment_length as f64).sqrt();
                if rms < 1e-6 {
                    continue;
                }
                exemplars.push(slice.iter().map(|v| T::of(v / rms)).collect());
                labels.push(s);
                got += 1;
            }
        }
    }
    ExemplarBank::new(exemplars, labels, specs.iter().map(|s| s.name.clone()).collect())
}
