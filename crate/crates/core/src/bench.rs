//! The synthetic duet benchmark: scenario generation, model setup and scoring of one trial.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{envelope_prototype, evaluate, identity_switch_rate, EvalReport};
use crate::nmf::{separate_nmf, NmfOptions};
use crate::pipeline::{separate_normalized, Mode, SeparationConfig, Selection};
use crate::rng::{self, derive_seed};
use crate::sampler::{Integrator, SamplerConfig};
use crate::scalar::Real;
use crate::schedule::NoiseSchedule;
use crate::score::{ExemplarBank, ScoreModel, SpectralKdePrior, SpectralPriorOptions};
use crate::signal::{mix, MixingModel, MixtureProblem, Waveform};
use crate::synth::{
    build_exemplar_bank, make_scenario, random_contour, render_scenario, render_voice, DuetScenario,
    ScenarioKind, SingerSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Diffusion(Mode),
    Nmf,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Diffusion(m) => m.name(),
            Method::Nmf => "nmf",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("nmf") {
            Ok(Method::Nmf)
        } else {
            s.parse().map(Method::Diffusion)
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sample_rate: u32,
    pub duration: f64,
    pub scenario: ScenarioKind,
    pub segment_length: usize,
    pub overlap: f64,
    pub steps: usize,
    pub integrator: Integrator,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub best_of_k: usize,
    pub selection: Selection,
    /// Patch length of the spectral exemplar prior.
    pub patch: usize,
    /// Window over which the prior's identity latent is shared.
    pub prior_window: usize,
    pub bank_per_singer: usize,
    pub bank_seed: u64,
    /// Prior floor bandwidth; `None` uses 0.1 times the bank RMS.
    pub bandwidth: Option<f64>,
    pub identity_frame: usize,
    pub nmf: NmfOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sample_rate: 8000,
            duration: 2.0,
            scenario: ScenarioKind::Crossing,
            segment_length: 8192,
            overlap: 0.75,
            steps: 100,
            integrator: Integrator::Heun,
            sigma_min: 0.01,
            sigma_max: 10.0,
            best_of_k: 3,
            selection: Selection::OracleSiSdr,
            patch: 256,
            prior_window: 8192,
            bank_per_singer: 64,
            bank_seed: 0,
            bandwidth: None,
            identity_frame: 1024,
            nmf: NmfOptions::default(),
        }
    }
}

impl BenchConfig {
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::log_linear(self.sigma_min, self.sigma_max)
    }

    pub fn separation(&self, mode: Mode, seed: u64) -> Result<SeparationConfig> {
        Ok(SeparationConfig {
            mode,
            segment_length: self.segment_length,
            overlap_ratio: self.overlap,
            sampler: SamplerConfig::new(&self.schedule()?, self.steps, self.integrator, seed)?,
            best_of_k: self.best_of_k,
            selection: self.selection,
        })
    }

    pub fn prior_options(&self) -> SpectralPriorOptions {
        SpectralPriorOptions {
            patch: self.patch,
            window: self.prior_window,
            bandwidth: self.bandwidth,
            smoothing: true,
        }
    }
}

/// Score model and identity prototypes shared by every trial.
pub struct BenchModels<T: Real> {
    pub prior: SpectralKdePrior<T>,
    pub prototypes: Vec<Vec<f64>>,
}

impl<T: Real> BenchModels<T> {
    /// Models built from the two preset singers.
    pub fn from_presets(cfg: &BenchConfig) -> Result<Self> {
        let singers = [SingerSpec::bright(), SingerSpec::dark()];
        let bank = build_exemplar_bank(&singers, cfg.patch, cfg.bank_per_singer, cfg.sample_rate, cfg.bank_seed)?;
        let prototypes = preset_prototypes(&singers, cfg)?;
        Self::from_bank(&bank, prototypes, cfg)
    }

    pub fn from_bank(bank: &ExemplarBank<T>, prototypes: Vec<Vec<f64>>, cfg: &BenchConfig) -> Result<Self> {
        Ok(Self { prior: SpectralKdePrior::from_bank(bank, cfg.prior_options())?, prototypes })
    }
}

/// Envelope prototypes from a few random phrases of each singer.
pub fn preset_prototypes(singers: &[SingerSpec], cfg: &BenchConfig) -> Result<Vec<Vec<f64>>> {
    singers
        .iter()
        .enumerate()
        .map(|(s, spec)| {
            let mut r = rng::seeded(derive_seed(cfg.bank_seed, &[0x1d, s as u64]));
            let phrases = (0..4)
                .map(|p| {
                    let c = random_contour(&mut r, 2.0);
                    render_voice::<f64>(spec, &c, cfg.sample_rate, 2.0, derive_seed(cfg.bank_seed, &[0x1d, s as u64, p]))
                })
                .collect::<Result<Vec<_>>>()?;
            let views: Vec<&[f64]> = phrases.iter().map(|w| w.samples()).collect();
            envelope_prototype(&views, cfg.identity_frame)
        })
        .collect()
}

/// One benchmark mixture with its references.
#[derive(Debug, Clone)]
pub struct Trial<T: Real> {
    pub seed: u64,
    pub scenario: DuetScenario,
    pub references: Vec<Waveform<T>>,
    pub mixture: Waveform<T>,
}

pub fn make_trial<T: Real>(cfg: &BenchConfig, seed: u64) -> Result<Trial<T>> {
    let scenario = make_scenario(cfg.scenario, cfg.duration, seed)?;
    let references: Vec<Waveform<T>> = render_scenario::<T>(&scenario, cfg.sample_rate)?.into();
    let mixture = mix(&references, &MixingModel::instantaneous_sum(2)?, None)?;
    Ok(Trial { seed, scenario, references, mixture })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub method: Method,
    pub seed: u64,
    pub si_sdri: f64,
    pub sdri: f64,
    pub identity_switch_rate: f64,
    pub report: EvalReport,
    pub seconds: f64,
}

/// Separates `trial` with `method` and scores the result. Diffusion modes run on the
/// gain-normalized mixture.
pub fn run_trial<T: Real>(
    cfg: &BenchConfig,
    models: &BenchModels<T>,
    trial: &Trial<T>,
    method: Method,
) -> Result<TrialOutcome> {
    let start = Instant::now();
    let n = trial.references.len();
    let problem = MixtureProblem::new(trial.mixture.clone(), MixingModel::instantaneous_sum(n)?)?;
    let estimates: Vec<Waveform<T>> = match method {
        Method::Diffusion(mode) => {
            let models_ref: Vec<&dyn ScoreModel<T>> = vec![&models.prior; n];
            let sep = cfg.separation(mode, derive_seed(trial.seed, &[0xd1f]))?;
            separate_normalized(&problem, &models_ref, &sep, Some(&trial.references))?.sources
        }
        Method::Nmf => {
            let opts = NmfOptions { seed: derive_seed(trial.seed, &[0x4e]), ..cfg.nmf.clone() };
            separate_nmf(&problem, &opts)?.sources
        }
    };
    let mut report = evaluate(&estimates, &trial.references, &trial.mixture)?;
    let views: Vec<&[T]> = estimates.iter().map(|e| e.samples()).collect();
    let isr = identity_switch_rate(&views, &models.prototypes, cfg.identity_frame)?;
    report.identity_switch_rate = Some(isr);
    Ok(TrialOutcome {
        method,
        seed: trial.seed,
        si_sdri: report.mean_si_sdri(),
        sdri: report.mean_sdri(),
        identity_switch_rate: isr,
        report,
        seconds: start.elapsed().as_secs_f64(),
    })
}
