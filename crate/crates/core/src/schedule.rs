//! Noise schedules and their discretization.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Geometric interpolation between `sigma_min` and `sigma_max`.
    #[default]
    LogLinear,
}

/// Maps normalized time `t ∈ [0, 1]` to a noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    sigma_min: f64,
    sigma_max: f64,
    kind: ScheduleKind,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self { sigma_min: 0.01, sigma_max: 10.0, kind: ScheduleKind::LogLinear }
    }
}

impl NoiseSchedule {
    pub fn log_linear(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        ensure!(
            sigma_min > 0.0 && sigma_min.is_finite() && sigma_max.is_finite() && sigma_min < sigma_max,
            Config,
            "schedule requires 0 < sigma_min < sigma_max, got {sigma_min} and {sigma_max}"
        );
        Ok(Self { sigma_min, sigma_max, kind: ScheduleKind::LogLinear })
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn sigma_at(&self, t: f64) -> Result<f64> {
        ensure!((0.0..=1.0).contains(&t), Domain, "time {t} outside [0, 1]");
        Ok(match self.kind {
            ScheduleKind::LogLinear => self.sigma_min.powf(1.0 - t) * self.sigma_max.powf(t),
        })
    }
}

/// Free-function form of [`NoiseSchedule::sigma_at`].
pub fn sigma_at(schedule: &NoiseSchedule, t: f64) -> Result<f64> {
    schedule.sigma_at(t)
}

/// Descending sampling grid from `t = 1` to `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub steps: usize,
    pub times: Vec<f64>,
    pub sigmas: Vec<f64>,
}

pub fn make_grid(schedule: &NoiseSchedule, steps: usize) -> Result<TimeGrid> {
    ensure!(steps >= 1, Config, "the time grid needs at least one step");
    let times: Vec<f64> = (0..=steps).map(|k| 1.0 - k as f64 / steps as f64).collect();
    let sigmas = times.iter().map(|&t| schedule.sigma_at(t)).collect::<Result<_>>()?;
    Ok(TimeGrid { steps, times, sigmas })
}
