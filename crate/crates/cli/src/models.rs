//! Exemplar banks and the score models built from them.

use std::path::PathBuf;

use anyhow::Context;
use duetsep::bench::{preset_prototypes, BenchConfig, BenchModels};
use duetsep::score::{load_bank_binary, load_bank_dir};
use duetsep::synth::{build_exemplar_bank, SingerSpec};
use duetsep::{ExemplarBank, SpectralKdePrior, SpectralPriorOptions};

use crate::config::RunConfig;

/// Loads and merges banks: directories of WAVs are cut into `patch`-sample exemplars, other
/// paths are read as binary bank files.
pub fn load_banks(paths: &[PathBuf], patch: usize) -> anyhow::Result<Option<ExemplarBank<f64>>> {
    if paths.is_empty() {
        return Ok(None);
    }
    let banks = paths
        .iter()
        .map(|p| {
            let bank = if p.is_dir() { load_bank_dir(p, Some(patch)) } else { load_bank_binary(p) };
            bank.with_context(|| format!("loading bank {}", p.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(Some(ExemplarBank::merge(banks)?))
}

fn prior_options(cfg: &RunConfig) -> SpectralPriorOptions {
    SpectralPriorOptions { patch: cfg.prior.patch, window: cfg.prior.window, bandwidth: cfg.prior.bandwidth, smoothing: true }
}

fn preset_bank(cfg: &RunConfig, sample_rate: u32) -> duetsep::Result<ExemplarBank<f64>> {
    build_exemplar_bank(
        &[SingerSpec::bright(), SingerSpec::dark()],
        cfg.prior.patch,
        cfg.prior.bank_per_singer,
        sample_rate,
        cfg.prior.bank_seed,
    )
}

/// The spectral exemplar prior from the configured banks, or from the synthetic presets
/// rendered at `sample_rate` when none are given.
pub fn spectral_prior(cfg: &RunConfig, sample_rate: u32) -> anyhow::Result<SpectralKdePrior<f64>> {
    let bank = match load_banks(&cfg.prior.banks, cfg.prior.patch)? {
        Some(b) => b,
        None => preset_bank(cfg, sample_rate)?,
    };
    Ok(SpectralKdePrior::from_bank(&bank, prior_options(cfg))?)
}

/// Benchmark models. Identity prototypes always come from the preset singers, since the
/// benchmark voices are rendered from them.
pub fn bench_models(cfg: &RunConfig, bench: &BenchConfig) -> anyhow::Result<BenchModels<f64>> {
    let prototypes = preset_prototypes(&[SingerSpec::bright(), SingerSpec::dark()], bench)?;
    let prior = spectral_prior(cfg, bench.sample_rate)?;
    Ok(BenchModels { prior, prototypes })
}
