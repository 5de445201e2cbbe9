//! Overlap/mode/seed grids over the synthetic benchmark, with per-cell aggregation.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use duetsep::bench::{make_trial, run_trial, BenchModels, Method};
use duetsep::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::models;
use crate::ConfigError;

/// One run of the grid. Failed runs keep their coordinates and carry the error instead of metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub method: Method,
    pub overlap: f64,
    pub seed: u64,
    pub ok: bool,
    pub si_sdri: Option<f64>,
    pub sdri: Option<f64>,
    pub si_sdr: Option<f64>,
    pub identity_switch_rate: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
    /// Resolved configuration that reproduces this row on its own.
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub overlap: f64,
    /// Successful runs.
    pub n: usize,
    pub failed: usize,
    pub si_sdri_mean: Option<f64>,
    pub si_sdri_std: Option<f64>,
    pub sdri_mean: Option<f64>,
    pub sdri_std: Option<f64>,
    pub identity_switch_rate_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<RunRow>,
    pub cells: Vec<CellSummary>,
}

/// Configuration for a single grid point.
pub fn row_config(base: &RunConfig, method: Method, overlap: f64, seed: u64) -> RunConfig {
    let mut c = base.clone();
    if let Method::Diffusion(mode) = method {
        c.pipeline.mode = mode;
    }
    c.pipeline.overlap = overlap;
    c.sampler.selection = Some(base.selection(true));
    if let Ok(steps) = base.steps() {
        c.schedule.steps = Some(steps);
        c.sampler.steps = None;
    }
    c.sweep.methods = vec![method];
    c.sweep.overlaps = vec![overlap];
    c.sweep.seeds = vec![seed];
    c
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let s = &cfg.sweep;
    if s.methods.is_empty() || s.overlaps.is_empty() || s.seeds.is_empty() {
        return Err(ConfigError("sweep grid needs at least one method, overlap and seed".into()));
    }
    if let Some(r) = s.overlaps.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(ConfigError(format!("overlap ratio {r} is outside [0, 1)")));
    }
    cfg.steps()?;
    Ok(())
}

/// Runs the cartesian product of methods × overlaps × seeds on up to `workers` threads. Rows are
/// returned in grid order whatever the scheduling.
pub fn sweep(cfg: &RunConfig, workers: usize) -> anyhow::Result<SweepReport> {
    validate(cfg)?;
    let probe = cfg.bench_config(cfg.sweep.overlaps[0])?;
    let models: BenchModels<f64> = models::bench_models(cfg, &probe)?;
    let grid: Vec<(Method, f64, u64)> = cfg
        .sweep
        .methods
        .iter()
        .flat_map(|&m| cfg.sweep.overlaps.iter().flat_map(move |&o| cfg.sweep.seeds.iter().map(move |&s| (m, o, s))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let rows: Vec<RunRow> = pool.install(|| {
        grid.par_iter()
            .map(|&(method, overlap, seed)| {
                let start = Instant::now();
                let config = row_config(cfg, method, overlap, seed);
                let outcome = (|| -> anyhow::Result<_> {
                    let bench = cfg.bench_config(overlap)?;
                    let trial = make_trial::<f64>(&bench, seed)?;
                    Ok(run_trial(&bench, &models, &trial, method)?)
                })();
                let seconds = start.elapsed().as_secs_f64();
                match outcome {
                    Ok(o) => {
                        log::info!("{method} overlap {overlap} seed {seed}: SI-SDRi {:.2} dB", o.si_sdri);
                        RunRow {
                            method,
                            overlap,
                            seed,
                            ok: true,
                            si_sdri: Some(o.si_sdri),
                            sdri: Some(o.sdri),
                            si_sdr: Some(o.report.mean_si_sdr()),
                            identity_switch_rate: Some(o.identity_switch_rate),
                            seconds,
                            error: None,
                            config,
                        }
                    }
                    Err(e) => {
                        log::warn!("{method} overlap {overlap} seed {seed} failed: {e:#}");
                        RunRow {
                            method,
                            overlap,
                            seed,
                            ok: false,
                            si_sdri: None,
                            sdri: None,
                            si_sdr: None,
                            identity_switch_rate: None,
                            seconds,
                            error: Some(format!("{e:#}")),
                            config,
                        }
                    }
                }
            })
            .collect()
    });
    let cells = aggregate(&rows);
    Ok(SweepReport { rows, cells })
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (n > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    (Some(mean), std)
}

/// Per-(method, overlap) mean and sample standard deviation over successful rows. Cells are
/// ordered by overlap, then by first appearance of the method.
pub fn aggregate(rows: &[RunRow]) -> Vec<CellSummary> {
    let mut keys: Vec<(Method, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|&(m, o)| m == r.method && o == r.overlap) {
            keys.push((r.method, r.overlap));
        }
    }
    keys.sort_by(|a, b| a.1.total_cmp(&b.1));
    keys.into_iter()
        .map(|(method, overlap)| {
            let cell: Vec<&RunRow> = rows.iter().filter(|r| r.method == method && r.overlap == overlap).collect();
            let ok: Vec<&&RunRow> = cell.iter().filter(|r| r.ok).collect();
            let pick = |f: fn(&RunRow) -> Option<f64>| ok.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
            let (si_sdri_mean, si_sdri_std) = mean_std(&pick(|r| r.si_sdri));
            let (sdri_mean, sdri_std) = mean_std(&pick(|r| r.sdri));
            CellSummary {
                method,
                overlap,
                n: ok.len(),
                failed: cell.len() - ok.len(),
                si_sdri_mean,
                si_sdri_std,
                sdri_mean,
                sdri_std,
                identity_switch_rate_mean: mean_std(&pick(|r| r.identity_switch_rate)).0,
            }
        })
        .collect()
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

/// Gnuplot-friendly text: one block per cell (blocks separated by two blank lines), each holding
/// a `mean std n` row of SI-SDRi. Missing values are written as `NaN`.
pub fn plot_data(report: &SweepReport) -> duetsep::Result<String> {
    if report.cells.is_empty() {
        return Err(Error::Domain("cannot plot an empty report".into()));
    }
    let mut cells: Vec<&CellSummary> = report.cells.iter().collect();
    cells.sort_by(|a, b| a.overlap.total_cmp(&b.overlap));
    let mut out = String::new();
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        writeln!(out, "# method={} overlap={}", c.method, c.overlap).unwrap();
        writeln!(out, "# si_sdri_mean si_sdri_std n").unwrap();
        writeln!(out, "{} {} {}", num(c.si_sdri_mean), num(c.si_sdri_std), c.n).unwrap();
    }
    Ok(out)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    method: String,
    overlap: f64,
    seed: u64,
    ok: bool,
    si_sdri: Option<f64>,
    sdri: Option<f64>,
    si_sdr: Option<f64>,
    identity_switch_rate: Option<f64>,
    seconds: f64,
    error: Option<&'a str>,
    config: String,
}

/// Writes `runs.csv`, `runs.json`, `summary.csv`, `summary.json` and `plot.dat` into `dir`.
pub fn write_outputs(report: &SweepReport, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = csv::Writer::from_path(dir.join("runs.csv"))?;
    for r in &report.rows {
        w.serialize(CsvRow {
            method: r.method.to_string(),
            overlap: r.overlap,
            seed: r.seed,
            ok: r.ok,
            si_sdri: r.si_sdri,
            sdri: r.sdri,
            si_sdr: r.si_sdr,
            identity_switch_rate: r.identity_switch_rate,
            seconds: r.seconds,
            error: r.error.as_deref(),
            config: serde_json::to_string(&r.config)?,
        })?;
    }
    w.flush()?;
    std::fs::write(dir.join("runs.json"), serde_json::to_string_pretty(&report.rows)?)?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    for c in &report.cells {
        w.serialize(c)?;
    }
    w.flush()?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&report.cells)?)?;
    std::fs::write(dir.join("plot.dat"), plot_data(report)?)?;
    Ok(())
}
