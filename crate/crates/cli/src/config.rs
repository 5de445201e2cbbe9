//! Run configuration: one TOML document with a section per module, plus dotted-key overrides.

use std::path::{Path, PathBuf};

use duetsep::bench::{BenchConfig, Method};
use duetsep::nmf::NmfOptions;
use duetsep::synth::ScenarioKind;
use duetsep::{Integrator, Mode, NoiseSchedule, SamplerConfig, Selection, SeparationConfig};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

const DEFAULT_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: ScheduleSection,
    pub sampler: SamplerSection,
    pub pipeline: PipelineSection,
    pub prior: PriorSection,
    pub nmf: NmfSection,
    pub bench: BenchSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub steps: Option<usize>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { sigma_min: 0.01, sigma_max: 10.0, steps: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub integrator: Integrator,
    /// Same as `schedule.steps`; the two must agree when both are set.
    pub steps: Option<usize>,
    pub seed: u64,
    pub best_of_k: usize,
    /// `None` picks oracle selection when references are available and mixture residual otherwise.
    pub selection: Option<Selection>,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self { integrator: Integrator::Heun, steps: None, seed: 0, best_of_k: 3, selection: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub mode: Mode,
    pub segment_length: usize,
    pub overlap: f64,
    pub sources: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self { mode: Mode::Ar, segment_length: 8192, overlap: 0.75, sources: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub patch: usize,
    pub window: usize,
    pub bandwidth: Option<f64>,
    /// Exemplar banks (WAV directories or binary files). Empty means the two synthetic presets.
    pub banks: Vec<PathBuf>,
    pub bank_per_singer: usize,
    pub bank_seed: u64,
}

impl Default for PriorSection {
    fn default() -> Self {
        Self { patch: 256, window: 8192, bandwidth: None, banks: Vec::new(), bank_per_singer: 64, bank_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmfSection {
    pub components: usize,
    pub iterations: usize,
    pub seed: u64,
    pub frame: Option<usize>,
    pub hop: Option<usize>,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for NmfSection {
    fn default() -> Self {
        let d = NmfOptions::default();
        Self {
            components: d.components_per_source,
            iterations: d.iterations,
            seed: d.seed,
            frame: d.frame,
            hop: d.hop,
            fmin: d.fmin,
            fmax: d.fmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub sample_rate: u32,
    pub duration: f64,
    pub scenario: ScenarioKind,
    pub identity_frame: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { sample_rate: 8000, duration: 2.0, scenario: ScenarioKind::Crossing, identity_frame: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub methods: Vec<Method>,
    pub overlaps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub workers: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            methods: Mode::ALL.iter().map(|&m| Method::Diffusion(m)).collect(),
            overlaps: vec![0.75],
            seeds: (0..20).collect(),
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Loads `path` if given (defaults otherwise) and applies `key=value` overrides in order.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        for o in overrides {
            cfg = cfg.with_override(o)?;
        }
        Ok(cfg)
    }

    /// Applies one `section.key=value` override. Values are read as TOML, falling back to a
    /// bare string, so `pipeline.mode=ar` and `sweep.seeds=[1,2]` both work.
    pub fn with_override(&self, assignment: &str) -> Result<Self, ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override '{assignment}' is not of the form key=value")))?;
        let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
        let mut doc = toml::Value::try_from(self).map_err(|e| ConfigError(e.to_string()))?;
        let path: Vec<&str> = key.trim().split('.').collect();
        let (last, parents) = path.split_last().expect("split yields at least one part");
        let mut node = &mut doc;
        for p in parents {
            node = node
                .as_table_mut()
                .and_then(|t| t.get_mut(*p))
                .ok_or_else(|| ConfigError(format!("unknown configuration section '{p}' in '{key}'")))?;
        }
        let table = node.as_table_mut().ok_or_else(|| ConfigError(format!("'{key}' does not name a key")))?;
        table.insert((*last).to_string(), value);
        doc.try_into().map_err(|e: toml::de::Error| ConfigError(format!("override '{assignment}': {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn steps(&self) -> Result<usize, ConfigError> {
        match (self.schedule.steps, self.sampler.steps) {
            (Some(a), Some(b)) if a != b => {
                Err(ConfigError(format!("schedule.steps = {a} disagrees with sampler.steps = {b}")))
            }
            (a, b) => Ok(a.or(b).unwrap_or(DEFAULT_STEPS)),
        }
    }

    pub fn selection(&self, have_references: bool) -> Selection {
        self.sampler.selection.unwrap_or(if have_references {
            Selection::OracleSiSdr
        } else {
            Selection::MixtureResidual
        })
    }

    pub fn noise_schedule(&self) -> duetsep::Result<NoiseSchedule> {
        NoiseSchedule::log_linear(self.schedule.sigma_min, self.schedule.sigma_max)
    }

    pub fn separation(&self, have_references: bool) -> anyhow::Result<SeparationConfig> {
        Ok(SeparationConfig {
            mode: self.pipeline.mode,
            segment_length: self.pipeline.segment_length,
            overlap_ratio: self.pipeline.overlap,
            sampler: SamplerConfig::new(&self.noise_schedule()?, self.steps()?, self.sampler.integrator, self.sampler.seed)?,
            best_of_k: self.sampler.best_of_k,
            selection: self.selection(have_references),
        })
    }

    pub fn nmf_options(&self) -> NmfOptions {
        NmfOptions {
            components_per_source: self.nmf.components,
            iterations: self.nmf.iterations,
            seed: self.nmf.seed,
            frame: self.nmf.frame,
            hop: self.nmf.hop,
            fmin: self.nmf.fmin,
            fmax: self.nmf.fmax,
        }
    }

    /// Benchmark settings for one sweep cell.
    pub fn bench_config(&self, overlap: f64) -> Result<BenchConfig, ConfigError> {
        Ok(BenchConfig {
            sample_rate: self.bench.sample_rate,
            duration: self.bench.duration,
            scenario: self.bench.scenario,
            segment_length: self.pipeline.segment_length,
            overlap,
            steps: self.steps()?,
            integrator: self.sampler.integrator,
            sigma_min: self.schedule.sigma_min,
            sigma_max: self.schedule.sigma_max,
            best_of_k: self.sampler.best_of_k,
            selection: self.selection(true),
            patch: self.prior.patch,
            prior_window: self.prior.window,
            bank_per_singer: self.prior.bank_per_singer,
            bank_seed: self.prior.bank_seed,
            bandwidth: self.prior.bandwidth,
            identity_frame: self.bench.identity_frame,
            nmf: self.nmf_options(),
        })
    }
}
