//! Probability-flow ODE sampling, the weakly supervised posterior score, and inpainting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::{self, derive_seed};
use crate::scalar::Real;
use crate::schedule::{make_grid, NoiseSchedule, TimeGrid};
use crate::score::ScoreModel;
use crate::signal::MixtureProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    #[default]
    Heun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub integrator: Integrator,
    pub grid: TimeGrid,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(schedule: &NoiseSchedule, steps: usize, integrator: Integrator, seed: u64) -> Result<Self> {
        Ok(Self { integrator, grid: make_grid(schedule, steps)?, seed })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            self.grid.steps >= 1 && self.grid.sigmas.len() == self.grid.steps + 1,
            Config,
            "sampler grid is empty or inconsistent"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionMode {
    PreviousEstimate,
    TeacherForcing,
}

/// Known values on a subset of positions, re-imposed after every integrator step.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintCondition<T: Real> {
    pub mask: Vec<bool>,
    pub values: Vec<T>,
    pub mode: ConditionMode,
}

impl<T: Real> InpaintCondition<T> {
    pub fn new(mask: Vec<bool>, values: Vec<T>, mode: ConditionMode) -> Result<Self> {
        ensure!(mask.len() == values.len(), Shape, "mask and values differ in length");
        Ok(Self { mask, values, mode })
    }

    /// Conditions the first `len` positions of a state of length `total`.
    pub fn leading(values: &[T], len: usize, total: usize, mode: ConditionMode) -> Result<Self> {
        ensure!(len <= total && values.len() >= len, Shape, "leading region exceeds the state");
        let mask = (0..total).map(|i| i < len).collect();
        let mut v = vec![T::zero(); total];
        v[..len].copy_from_slice(&values[..len]);
        Self::new(mask, v, mode)
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }
}

/// Overwrites masked positions with `values + sigma·ε`, leaving the rest untouched.
pub fn apply_inpaint<T: Real, R: Rng + ?Sized>(
    state: &mut [T],
    condition: &InpaintCondition<T>,
    sigma: T,
    rng: &mut R,
) -> Result<()> {
    ensure!(
        state.len() == condition.len(),
        Shape,
        "condition length {} does not match state length {}",
        condition.len(),
        state.len()
    );
    for ((s, &m), &v) in state.iter_mut().zip(&condition.mask).zip(&condition.values) {
        if m {
            *s = v + sigma * rng::standard_normal::<T, R>(rng);
        }
    }
    Ok(())
}

fn check_finite<T: Real>(v: &[T], step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalDivergence { step })
    }
}

/// Integrates `dx/dσ = -σ·f(x, σ)` along the grid. `project` runs after every step with the
/// new noise level.
fn integrate<T: Real>(
    state: &mut Vec<T>,
    config: &SamplerConfig,
    mut drift: impl FnMut(&[T], T) -> Result<Vec<T>>,
    mut project: impl FnMut(&mut [T], T) -> Result<()>,
) -> Result<()> {
    let sig: Vec<T> = config.grid.sigmas.iter().map(|&s| T::of(s)).collect();
    for k in 0..config.grid.steps {
        let (s0, s1) = (sig[k], sig[k + 1]);
        let ds = s1 - s0;
        let g0 = drift(state, s0)?;
        let mut next: Vec<T> = state.iter().zip(&g0).map(|(&x, &g)| x - ds * s0 * g).collect();
        if config.integrator == Integrator::Heun {
            check_finite(&next, k)?;
            let g1 = drift(&next, s1)?;
            let half = T::of(0.5);
            for ((n, &x), (&a, &b)) in next.iter_mut().zip(state.iter()).zip(g0.iter().zip(&g1)) {
                *n = x - ds * half * (s0 * a + s1 * b);
            }
        }
        check_finite(&next, k)?;
        project(&mut next, s1)?;
        *state = next;
    }
    Ok(())
}

/// Draws one sample of length `len` from `model` by integrating the probability-flow ODE from
/// `N(0, σ_max²)` noise down to `σ_min`.
pub fn sample_prior<T: Real>(model: &dyn ScoreModel<T>, len: usize, config: &SamplerConfig) -> Result<Vec<T>> {
    config.validate()?;
    ensure!(model.accepts_length(len), Shape, "model is not defined at length {len}");
    let mut r = rng::seeded(derive_seed(config.seed, &[0]));
    let mut state = rng::normal_vec(&mut r, len, T::of(config.grid.sigmas[0]));
    integrate(&mut state, config, |x, s| model.score(x, s), |_, _| Ok(()))?;
    Ok(state)
}

/// Posterior score of the free sources `s_2..s_N` given the mixture, with `s_1 = x - Σ s_j`
/// as the constrained source whose prior is `models[0]`.
pub fn posterior_score<T: Real>(
    models: &[&dyn ScoreModel<T>],
    states: &[Vec<T>],
    mixture: &[T],
    sigma: T,
) -> Result<Vec<Vec<T>>> {
    ensure!(models.len() >= 2, Config, "posterior score needs at least two sources");
    ensure!(
        states.len() + 1 == models.len(),
        Config,
        "expected {} free states, got {}",
        models.len() - 1,
        states.len()
    );
    for s in states {
        ensure!(s.len() == mixture.len(), Shape, "state length differs from the mixture");
    }
    let residual = constrained(mixture, states);
    let g1 = models[0].score(&residual, sigma)?;
    states
        .iter()
        .zip(&models[1..])
        .map(|(s, m)| Ok(m.score(s, sigma)?.into_iter().zip(&g1).map(|(a, &b)| a - b).collect()))
        .collect()
}

fn constrained<T: Real>(mixture: &[T], free: &[Vec<T>]) -> Vec<T> {
    let mut r = mixture.to_vec();
    for s in free {
        for (a, &b) in r.iter_mut().zip(s) {
            *a -= b;
        }
    }
    r
}

/// Samples all sources from the posterior given the mixture. `conditions` is either empty or
/// holds one optional condition per free source (`s_2..s_N`). Returns `[s_1, s_2, …, s_N]`.
pub fn sample_posterior<T: Real>(
    problem: &MixtureProblem<T>,
    models: &[&dyn ScoreModel<T>],
    config: &SamplerConfig,
    conditions: &[Option<InpaintCondition<T>>],
) -> Result<Vec<Vec<T>>> {
    config.validate()?;
    let n = problem.sources();
    ensure!(models.len() == n, Config, "expected {n} score models, got {}", models.len());
    let x = problem.mixture.samples();
    let len = x.len();
    for m in models {
        ensure!(m.accepts_length(len), Shape, "score model is not defined at length {len}");
    }
    ensure!(
        conditions.is_empty() || conditions.len() == n - 1,
        Config,
        "expected one condition slot per free source ({}), got {}",
        n - 1,
        conditions.len()
    );
    for c in conditions.iter().flatten() {
        ensure!(c.len() == len, Shape, "condition length {} differs from mixture length {len}", c.len());
    }

    let mut init_rng = rng::seeded(derive_seed(config.seed, &[0]));
    let mut clamp_rng = rng::seeded(derive_seed(config.seed, &[1]));
    let sigma_max = T::of(config.grid.sigmas[0]);
    let share = T::one() / T::of_usize(n);
    let mut free: Vec<Vec<T>> = (0..n - 1)
        .map(|_| x.iter().map(|&v| v * share + sigma_max * rng::standard_normal::<T, _>(&mut init_rng)).collect())
        .collect();

    let mut project = |state: &mut [T], sigma: T| -> Result<()> {
        for (i, c) in conditions.iter().enumerate() {
            if let Some(c) = c {
                apply_inpaint(&mut state[i * len..(i + 1) * len], c, sigma, &mut clamp_rng)?;
            }
        }
        Ok(())
    };

    // the free sources are integrated as one flat state
    let mut state: Vec<T> = free.concat();
    project(&mut state, sigma_max)?;
    integrate(
        &mut state,
        config,
        |flat, sigma| {
            let parts: Vec<Vec<T>> = flat.chunks(len).map(|c| c.to_vec()).collect();
            Ok(posterior_score(models, &parts, x, sigma)?.concat())
        },
        &mut project,
    )?;
    free = state.chunks(len).map(|c| c.to_vec()).collect();
    let mut out = Vec::with_capacity(n);
    out.push(constrained(x, &free));
    out.extend(free);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::GaussianPrior;
    use crate::signal::{MixingModel, Waveform};

    fn cfg(steps: usize, integrator: Integrator, seed: u64) -> SamplerConfig {
        SamplerConfig::new(&NoiseSchedule::default(), steps, integrator, seed).unwrap()
    }

    #[test]
    fn single_euler_step_is_one_update() {
        let p = GaussianPrior::new(vec![0.0; 3], 1.0).unwrap();
        let c = cfg(1, Integrator::Euler, 11);
        let out = sample_prior(&p, 3, &c).unwrap();
        let mut r = rng::seeded(derive_seed(11, &[0]));
        let x0: Vec<f64> = rng::normal_vec(&mut r, 3, 10.0);
        for (o, x) in out.iter().zip(&x0) {
            let score = -x / (1.0 + 100.0);
            assert!((o - (x - (0.01 - 10.0) * 10.0 * score)).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_score_examples() {
        let p = GaussianPrior::new(vec![0.0; 2], 1.0).unwrap();
        let models: Vec<&dyn ScoreModel<f64>> = vec![&p, &p];
        let g = posterior_score(&models, &[vec![0.0; 2]], &[0.0; 2], 0.0).unwrap();
        assert_eq!(g, vec![vec![0.0; 2]]);
        let models3: Vec<&dyn ScoreModel<f64>> = vec![&p, &p, &p];
        let x = [0.9, -0.3];
        let third: Vec<f64> = x.iter().map(|v| v / 3.0).collect();
        let g3 = posterior_score(&models3, &[third.clone(), third], &x, 0.5).unwrap();
        assert_eq!(g3[0], g3[1]);
        assert!(posterior_score(&models[..1], &[], &x, 0.1).is_err());
    }

    #[test]
    fn inpaint_examples() {
        let mut r = rng::seeded(0);
        let cond = InpaintCondition::new(vec![true, false, true], vec![1.0, 2.0, 3.0], ConditionMode::TeacherForcing).unwrap();
        let mut s = vec![0.0, 0.0, 0.0];
        apply_inpaint(&mut s, &cond, 0.0, &mut r).unwrap();
        assert_eq!(s, vec![1.0, 0.0, 3.0]);
        let empty = InpaintCondition::new(vec![false; 3], vec![9.0; 3], ConditionMode::PreviousEstimate).unwrap();
        let mut t = vec![4.0, 5.0, 6.0];
        apply_inpaint(&mut t, &empty, 1.0, &mut r).unwrap();
        assert_eq!(t, vec![4.0, 5.0, 6.0]);
        let n = 10_000;
        let full = InpaintCondition::new(vec![true; n], vec![0.5; n], ConditionMode::TeacherForcing).unwrap();
        let mut u = vec![0.0; n];
        apply_inpaint(&mut u, &full, 1.0, &mut r).unwrap();
        let var = u.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.05);
        assert!(apply_inpaint(&mut [0.0; 2], &full, 1.0, &mut r).is_err());
    }

    #[test]
    fn posterior_sources_sum_to_mixture_and_are_deterministic() {
        let p = GaussianPrior::new(vec![0.0; 4], 1.0).unwrap();
        let models: Vec<&dyn ScoreModel<f64>> = vec![&p, &p];
        let x = Waveform::new(vec![1.0, -0.5, 2.0, 0.25], 8000).unwrap();
        let prob = MixtureProblem::new(x.clone(), MixingModel::instantaneous_sum(2).unwrap()).unwrap();
        let c = cfg(20, Integrator::Heun, 5);
        let a = sample_posterior(&prob, &models, &c, &[]).unwrap();
        let b = sample_posterior(&prob, &models, &c, &[]).unwrap();
        assert_eq!(a, b);
        for i in 0..4 {
            assert!((a[0][i] + a[1][i] - x.samples()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_shape_is_checked() {
        let p = GaussianPrior::new(vec![0.0; 4], 1.0).unwrap();
        let models: Vec<&dyn ScoreModel<f64>> = vec![&p, &p];
        let x = Waveform::new(vec![0.0; 4], 8000).unwrap();
        let prob = MixtureProblem::new(x, MixingModel::instantaneous_sum(2).unwrap()).unwrap();
        let bad = InpaintCondition::new(vec![true; 3], vec![0.0; 3], ConditionMode::TeacherForcing).unwrap();
        let r = sample_posterior(&prob, &models, &cfg(5, Integrator::Heun, 0), &[Some(bad)]);
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    struct Exploding;
    impl ScoreModel<f64> for Exploding {
        fn score(&self, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
            Ok(x.iter().map(|_| if sigma < 1.0 { f64::NAN } else { 0.0 }).collect())
        }
        fn log_density(&self, _: &[f64], _: f64) -> Result<f64> {
            Ok(0.0)
        }
    }

    #[test]
    fn divergence_reports_step() {
        let r = sample_prior(&Exploding, 2, &cfg(10, Integrator::Euler, 0));
        assert!(matches!(r, Err(Error::NumericalDivergence { step }) if step > 0 && step < 10));
    }
}
