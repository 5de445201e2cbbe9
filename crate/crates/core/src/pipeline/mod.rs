//! Segment-wise separation: naive, segmented, auto-regressive and teacher-forced strategies.

mod plan;
mod select;
mod stitch;

pub use plan::{plan_segments, SegmentPlan};
pub use select::{select_best_of_k, Selected, Selection};
pub use stitch::{crossfade_width, stitch};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::derive_seed;
use crate::sampler::{sample_posterior, ConditionMode, InpaintCondition, SamplerConfig};
use crate::scalar::Real;
use crate::score::ScoreModel;
use crate::signal::{MixtureProblem, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One run over the whole (padded) mixture.
    Naive,
    /// Independent runs on disjoint segments of `L·(1 − r)` samples.
    Segmented,
    /// Overlapped segments, each conditioned on the previous segment's output.
    Ar,
    /// As `Ar`, but conditioned on the reference sources.
    ArTf,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Naive, Mode::Segmented, Mode::Ar, Mode::ArTf];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Naive => "naive",
            Mode::Segmented => "segmented",
            Mode::Ar => "ar",
            Mode::ArTf => "ar-tf",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| Error::Config(format!("unknown separation mode '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationConfig {
    pub mode: Mode,
    pub segment_length: usize,
    pub overlap_ratio: f64,
    /// Base sampler settings; its seed is the root of every per-candidate seed.
    pub sampler: SamplerConfig,
    pub best_of_k: usize,
    pub selection: Selection,
}

impl SeparationConfig {
    /// The segmentation this configuration applies to a signal of `len` samples.
    pub fn plan_for(&self, len: usize) -> Result<SegmentPlan> {
        ensure!(self.best_of_k >= 1, Config, "best_of_k must be at least 1");
        let base = plan_segments(len, self.segment_length, self.overlap_ratio)?;
        match self.mode {
            Mode::Naive => {
                let padded = len.div_ceil(self.segment_length) * self.segment_length;
                let mut plan = plan_segments(padded, padded, 0.0)?;
                plan.signal_length = len;
                Ok(plan)
            }
            Mode::Segmented => plan_segments(len, base.hop, 0.0),
            Mode::Ar | Mode::ArTf => Ok(base),
        }
    }
}

/// Seed used for candidate `candidate` of segment `segment`.
pub fn candidate_seed(base: u64, segment: usize, candidate: usize) -> u64 {
    derive_seed(base, &[segment as u64, candidate as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub index: usize,
    pub offset: usize,
    pub length: usize,
    pub chosen: usize,
    pub score: f64,
    pub permutation: Vec<usize>,
    pub seeds: Vec<u64>,
}

/// Serializable summary of a separation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationDiagnostics {
    pub mode: Mode,
    pub selection: Selection,
    pub best_of_k: usize,
    pub steps: usize,
    pub seed: u64,
    pub plan: SegmentPlan,
    pub per_segment: Vec<SegmentRecord>,
}

#[derive(Debug, Clone)]
pub struct SeparationResult<T: Real> {
    pub sources: Vec<Waveform<T>>,
    pub diagnostics: SeparationDiagnostics,
}

fn padded<T: Real>(v: &[T], len: usize) -> Vec<T> {
    let mut out = v.to_vec();
    out.resize(len, T::zero());
    out
}

/// Separates `problem` with the strategy in `config`.
pub fn separate<T: Real>(
    problem: &MixtureProblem<T>,
    models: &[&dyn ScoreModel<T>],
    config: &SeparationConfig,
    references: Option<&[Waveform<T>]>,
) -> Result<SeparationResult<T>> {
    let n = problem.sources();
    let x = problem.mixture.samples();
    let rate = problem.mixture.sample_rate();
    ensure!(models.len() == n, Config, "expected {n} score models, got {}", models.len());
    let needs_refs = config.selection == Selection::OracleSiSdr || config.mode == Mode::ArTf;
    if needs_refs && references.is_none() {
        return Err(Error::Config(format!(
            "mode {} with {:?} selection requires reference sources",
            config.mode.name(),
            config.selection
        )));
    }
    if let Some(r) = references {
        ensure!(r.len() == n, Shape, "{} references for {n} sources", r.len());
        ensure!(r.iter().all(|w| w.len() == x.len()), Shape, "reference lengths differ from the mixture");
    }
    let plan = config.plan_for(x.len())?;
    let l = plan.segment_length;
    let xp = padded(x, plan.padded_length);
    let refs_p: Option<Vec<Vec<T>>> =
        references.map(|r| r.iter().map(|w| padded(w.samples(), plan.padded_length)).collect());
    let overlap = plan.overlap();

    let mut outputs: Vec<Vec<Vec<T>>> = Vec::with_capacity(plan.len());
    let mut records = Vec::with_capacity(plan.len());
    for (j, &o) in plan.offsets.iter().enumerate() {
        let seg_x = Waveform::new(xp[o..o + l].to_vec(), rate)?;
        let seg_problem = MixtureProblem::new(seg_x, problem.mixing)?;
        let seg_refs: Option<Vec<Vec<T>>> =
            refs_p.as_ref().map(|r| r.iter().map(|s| s[o..o + l].to_vec()).collect());

        let conditions: Vec<Option<InpaintCondition<T>>> = match config.mode {
            Mode::Ar | Mode::ArTf if j > 0 && overlap > 0 => (1..n)
                .map(|i| {
                    let (values, mode) = if config.mode == Mode::Ar {
                        (&outputs[j - 1][i][plan.hop..], ConditionMode::PreviousEstimate)
                    } else {
                        (&seg_refs.as_ref().expect("checked above")[i][..], ConditionMode::TeacherForcing)
                    };
                    InpaintCondition::leading(values, overlap, l, mode).map(Some)
                })
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };

        let seeds: Vec<u64> =
            (0..config.best_of_k).map(|c| candidate_seed(config.sampler.seed, j, c)).collect();
        let candidates = seeds
            .iter()
            .map(|&s| sample_posterior(&seg_problem, models, &config.sampler.with_seed(s), &conditions))
            .collect::<Result<Vec<_>>>()?;
        let sel = select_best_of_k(&candidates, config.selection, seg_refs.as_deref(), seg_problem.mixture.samples())?;
        let chosen: Vec<Vec<T>> = sel.permutation.iter().map(|&p| candidates[sel.index][p].clone()).collect();
        log::debug!("segment {j}: candidate {} score {:.3}", sel.index, sel.score);
        records.push(SegmentRecord {
            index: j,
            offset: o,
            length: l,
            chosen: sel.index,
            score: sel.score,
            permutation: sel.permutation,
            seeds,
        });
        outputs.push(chosen);
    }

    let merged = stitch(&outputs, &plan)?;
    let sources = merged.into_iter().map(|s| Waveform::new(s, rate)).collect::<Result<_>>()?;
    Ok(SeparationResult {
        sources,
        diagnostics: SeparationDiagnostics {
            mode: config.mode,
            selection: config.selection,
            best_of_k: config.best_of_k,
            steps: config.sampler.grid.steps,
            seed: config.sampler.seed,
            plan,
            per_segment: records,
        },
    })
}

/// Gain applied by [`separate_normalized`]: brings each of the `n` sources of `mixture` to roughly
/// unit RMS, the scale exemplar priors are built at.
pub fn normalizing_gain<T: Real>(mixture: &Waveform<T>, n: usize) -> Result<T> {
    let rms = mixture.rms();
    ensure!(rms > T::zero(), Domain, "mixture is silent");
    Ok(T::of_usize(n).sqrt() / rms)
}

/// [`separate`] on a copy of the mixture (and references) scaled by [`normalizing_gain`], with
/// the estimates scaled back to the input level.
pub fn separate_normalized<T: Real>(
    problem: &MixtureProblem<T>,
    models: &[&dyn ScoreModel<T>],
    config: &SeparationConfig,
    references: Option<&[Waveform<T>]>,
) -> Result<SeparationResult<T>> {
    let gain = normalizing_gain(&problem.mixture, problem.sources())?;
    let scaled = MixtureProblem::new(problem.mixture.scaled(gain), problem.mixing)?;
    let refs: Option<Vec<Waveform<T>>> = references.map(|r| r.iter().map(|w| w.scaled(gain)).collect());
    let mut res = separate(&scaled, models, config, refs.as_deref())?;
    let inv = T::one() / gain;
    res.sources = res.sources.iter().map(|s| s.scaled(inv)).collect();
    Ok(res)
}
