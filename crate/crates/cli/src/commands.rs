//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use duetsep::metrics::envelope_prototype;
use duetsep::nmf::separate_nmf;
use duetsep::synth::{make_scenario, render_scenario, ScenarioKind};
use duetsep::{
    evaluate, identity_switch_rate, mix, read_wav, separate_normalized, write_wav, EvalReport, Integrator,
    MixingModel, MixtureProblem, Mode, ScoreModel, Selection, WavFormat, Waveform,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{models, sweep, ConfigError};

#[derive(Debug, Parser)]
#[command(name = "duetsep", version, about = "Separate duet singing voices with diffusion posterior sampling")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic duet scenario.
    Synth(SynthArgs),
    /// Separate a mixture with the diffusion pipeline.
    Separate(SeparateArgs),
    /// Separate a mixture with the pitch-informed NMF baseline.
    Nmf(NmfArgs),
    /// Score estimates against references.
    Eval(EvalArgs),
    /// Run a mode × overlap × seed grid on the synthetic benchmark.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set sampler.steps=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        RunConfig::resolve(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "crossing")]
    pub scenario: ScenarioKind,
    #[arg(long, default_value_t = 8.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8000)]
    pub sample_rate: u32,
    /// Write 16-bit PCM instead of 32-bit float.
    #[arg(long)]
    pub pcm16: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    #[arg(long)]
    pub mixture: PathBuf,
    /// Reference sources, one per source; needed for oracle selection and teacher forcing.
    #[arg(long, num_args = 1..)]
    pub refs: Vec<PathBuf>,
    /// Exemplar bank (WAV directory or binary file). Repeatable; defaults to the synthetic presets.
    #[arg(long = "bank")]
    pub banks: Vec<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Segment length in samples.
    #[arg(long = "segment")]
    pub segment: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "best-of")]
    pub best_of: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_selection)]
    pub selection: Option<Selection>,
    #[arg(long, value_parser = parse_integrator)]
    pub integrator: Option<Integrator>,
    #[arg(long)]
    pub sources: Option<usize>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NmfArgs {
    #[arg(long)]
    pub mixture: PathBuf,
    #[arg(long)]
    pub sources: Option<usize>,
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of estimate WAVs, matched to references in file-name order.
    #[arg(long)]
    pub est: PathBuf,
    /// Directory of reference WAVs.
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long)]
    pub mixture: PathBuf,
    /// Frame length of the identity-switch diagnostic.
    #[arg(long, default_value_t = 1024)]
    pub identity_frame: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Append a summary row to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Worker threads; falls back to `sweep.workers`, then to the number of CPUs.
    #[arg(long, env = "DUETSEP_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_selection(s: &str) -> Result<Selection, String> {
    match s {
        "oracle" | "oracle-si-sdr" | "oracle_si_sdr" => Ok(Selection::OracleSiSdr),
        "mixture" | "mixture-residual" | "mixture_residual" => Ok(Selection::MixtureResidual),
        _ => Err(format!("unknown selection '{s}' (expected oracle or mixture-residual)")),
    }
}

fn parse_integrator(s: &str) -> Result<Integrator, String> {
    match s {
        "euler" => Ok(Integrator::Euler),
        "heun" => Ok(Integrator::Heun),
        _ => Err(format!("unknown integrator '{s}' (expected euler or heun)")),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Separate(a) => separate_cmd(&a),
        Command::Nmf(a) => nmf_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::Sweep(a) => sweep_cmd(&a),
    }
}

fn input(path: &Path) -> Result<&Path, ConfigError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(ConfigError(format!("input {} does not exist", path.display())))
    }
}

fn read_input(path: &Path) -> anyhow::Result<Waveform<f64>> {
    read_wav(input(path)?).with_context(|| format!("reading {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn write_sources(dir: &Path, sources: &[Waveform<f64>]) -> anyhow::Result<()> {
    for (i, s) in sources.iter().enumerate() {
        write_wav(dir.join(format!("source_{i}.wav")), s, WavFormat::Float32)?;
    }
    Ok(())
}

fn wavs_in(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(input(dir)?)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

pub fn synth(a: &SynthArgs) -> anyhow::Result<()> {
    let scenario = make_scenario(a.scenario, a.duration, a.seed)?;
    let voices: Vec<Waveform<f64>> = render_scenario::<f64>(&scenario, a.sample_rate)?.into();
    let mixture = mix(&voices, &MixingModel::instantaneous_sum(2)?, None)?;
    std::fs::create_dir_all(&a.out)?;
    let format = if a.pcm16 { WavFormat::Pcm16 } else { WavFormat::Float32 };
    for (i, v) in voices.iter().enumerate() {
        write_wav(a.out.join(format!("voice_{i}.wav")), v, format)?;
    }
    write_wav(a.out.join("mixture.wav"), &mixture, format)?;
    let mut w = csv::Writer::from_path(a.out.join("contours.csv"))?;
    w.write_record(["time", "f0_voice_0", "f0_voice_1"])?;
    let frames = (a.duration * 100.0).round() as usize;
    for k in 0..=frames {
        let t = (k as f64 * 0.01).min(a.duration);
        w.write_record([
            format!("{t:.2}"),
            format!("{:.4}", scenario.contours[0].at(t)),
            format!("{:.4}", scenario.contours[1].at(t)),
        ])?;
    }
    w.flush()?;
    write_json(&a.out.join("scenario.json"), &scenario)
}

#[derive(Serialize)]
struct SeparateReport<'a> {
    config: &'a RunConfig,
    diagnostics: &'a duetsep::pipeline::SeparationDiagnostics,
}

pub fn separate_cmd(a: &SeparateArgs) -> anyhow::Result<()> {
    let mut cfg = a.config.resolve()?;
    if let Some(m) = a.mode {
        cfg.pipeline.mode = m;
    }
    if let Some(r) = a.overlap {
        cfg.pipeline.overlap = r;
    }
    if let Some(l) = a.segment {
        cfg.pipeline.segment_length = l;
    }
    if let Some(s) = a.steps {
        cfg.schedule.steps = Some(s);
        cfg.sampler.steps = None;
    }
    if let Some(k) = a.best_of {
        cfg.sampler.best_of_k = k;
    }
    if let Some(s) = a.seed {
        cfg.sampler.seed = s;
    }
    if a.selection.is_some() {
        cfg.sampler.selection = a.selection;
    }
    if let Some(i) = a.integrator {
        cfg.sampler.integrator = i;
    }
    if let Some(n) = a.sources {
        cfg.pipeline.sources = n;
    }
    cfg.prior.banks.extend(a.banks.iter().cloned());

    let mixture = read_input(&a.mixture)?;
    let refs: Vec<Waveform<f64>> = a.refs.iter().map(|p| read_input(p)).collect::<anyhow::Result<_>>()?;
    let n = cfg.pipeline.sources;
    if !refs.is_empty() && refs.len() != n {
        return Err(ConfigError(format!("{} references given for {n} sources", refs.len())).into());
    }
    let sep = cfg.separation(!refs.is_empty())?;
    let prior = models::spectral_prior(&cfg, mixture.sample_rate())?;
    let problem = MixtureProblem::new(mixture, MixingModel::instantaneous_sum(n)?)?;
    let score_models: Vec<&dyn ScoreModel<f64>> = vec![&prior; n];
    let result = separate_normalized(&problem, &score_models, &sep, (!refs.is_empty()).then_some(&refs[..]))?;
    std::fs::create_dir_all(&a.out)?;
    write_sources(&a.out, &result.sources)?;
    write_json(&a.out.join("diagnostics.json"), &SeparateReport { config: &cfg, diagnostics: &result.diagnostics })
}

#[derive(Serialize)]
struct NmfReport<'a> {
    config: &'a RunConfig,
    fallback: bool,
    components: usize,
}

pub fn nmf_cmd(a: &NmfArgs) -> anyhow::Result<()> {
    let mut cfg = a.config.resolve()?;
    if let Some(n) = a.sources {
        cfg.pipeline.sources = n;
    }
    if let Some(c) = a.components {
        cfg.nmf.components = c;
    }
    if let Some(i) = a.iters {
        cfg.nmf.iterations = i;
    }
    if let Some(s) = a.seed {
        cfg.nmf.seed = s;
    }
    let mixture = read_input(&a.mixture)?;
    let problem = MixtureProblem::new(mixture, MixingModel::instantaneous_sum(cfg.pipeline.sources)?)?;
    let res = separate_nmf(&problem, &cfg.nmf_options())?;
    if res.fallback {
        log::warn!("no pitch found; NMF started from random factors");
    }
    std::fs::create_dir_all(&a.out)?;
    write_sources(&a.out, &res.sources)?;
    write_json(&a.out.join("nmf.json"), &NmfReport { config: &cfg, fallback: res.fallback, components: res.model.rank() })
}

/// Scores estimates; the identity diagnostic uses each reference's own envelope as its prototype.
pub fn evaluate_dirs(est: &Path, refs: &Path, mixture: &Path, identity_frame: usize) -> anyhow::Result<EvalReport> {
    let read_all = |paths: Vec<PathBuf>| paths.iter().map(|p| read_input(p)).collect::<anyhow::Result<Vec<_>>>();
    let estimates = read_all(wavs_in(est)?)?;
    let references = read_all(wavs_in(refs)?)?;
    if estimates.is_empty() || estimates.len() != references.len() {
        return Err(ConfigError(format!(
            "{} estimates and {} references; counts must match and be nonzero",
            estimates.len(),
            references.len()
        ))
        .into());
    }
    let mixture = read_input(mixture)?;
    let mut report = evaluate(&estimates, &references, &mixture)?;
    if references.len() >= 2 {
        let protos: duetsep::Result<Vec<Vec<f64>>> =
            references.iter().map(|r| envelope_prototype(&[r.samples()], identity_frame)).collect();
        let views: Vec<&[f64]> = estimates.iter().map(|e| e.samples()).collect();
        report.identity_switch_rate = match protos.and_then(|p| identity_switch_rate(&views, &p, identity_frame)) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("identity switch rate unavailable: {e}");
                None
            }
        };
    }
    Ok(report)
}

pub fn eval_cmd(a: &EvalArgs) -> anyhow::Result<()> {
    let report = evaluate_dirs(&a.est, &a.refs, &a.mixture, a.identity_frame)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_json(&a.out, &report)?;
    if let Some(path) = &a.csv {
        let fresh = !path.exists();
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if fresh {
            w.write_record(["estimates", "mean_si_sdri", "mean_sdri", "mean_si_sdr", "identity_switch_rate", "permutation"])?;
        }
        let perm: Vec<String> = report.permutation.iter().map(usize::to_string).collect();
        w.write_record([
            a.est.display().to_string(),
            report.mean_si_sdri().to_string(),
            report.mean_sdri().to_string(),
            report.mean_si_sdr().to_string(),
            report.identity_switch_rate.map_or_else(String::new, |r| r.to_string()),
            perm.join(" "),
        ])?;
        w.flush()?;
    }
    Ok(())
}

pub fn sweep_cmd(a: &SweepArgs) -> anyhow::Result<()> {
    let cfg = a.config.resolve()?;
    let workers = a
        .workers
        .or(cfg.sweep.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = sweep::sweep(&cfg, workers)?;
    sweep::write_outputs(&report, &a.out)?;
    let failed = report.rows.iter().filter(|r| !r.ok).count();
    if failed > 0 {
        log::warn!("{failed} of {} runs failed; see runs.csv", report.rows.len());
    }
    for c in &report.cells {
        println!(
            "{:<10} overlap {:<5} n {:>3}  SI-SDRi {} ± {}",
            c.method.name(),
            c.overlap,
            c.n,
            c.si_sdri_mean.map_or("-".into(), |v| format!("{v:.2}")),
            c.si_sdri_std.map_or("-".into(), |v| format!("{v:.2}")),
        );
    }
    Ok(())
}
