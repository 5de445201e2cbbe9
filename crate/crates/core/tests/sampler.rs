use duetsep::rng::{derive_seed, seeded, standard_normal};
use duetsep::{
    apply_inpaint, denoiser_to_score, gaussian_score, make_grid, posterior_score, sample_posterior, sample_prior,
    ConditionMode, GaussianPrior, InpaintCondition, Integrator, MixingModel, MixturePrior, MixtureProblem,
    NoiseSchedule, SamplerConfig, ScoreModel, Waveform,
};
use proptest::prelude::*;
use rand::Rng;

fn config(steps: usize, integrator: Integrator, seed: u64) -> SamplerConfig {
    SamplerConfig::new(&NoiseSchedule::default(), steps, integrator, seed).unwrap()
}

fn problem(x: Vec<f64>, n: usize) -> MixtureProblem<f64> {
    MixtureProblem::new(Waveform::new(x, 8000).unwrap(), MixingModel::instantaneous_sum(n).unwrap()).unwrap()
}

#[test]
fn hundred_step_grid_has_uniform_time_spacing() {
    let g = make_grid(&NoiseSchedule::default(), 100).unwrap();
    assert_eq!(g.times.len(), 101);
    for w in g.times.windows(2) {
        assert!(((w[0] - w[1]) - 0.01).abs() < 1e-12);
    }
}

#[test]
fn heun_moments_are_no_worse_than_euler() {
    let prior = GaussianPrior::new(vec![0.0; 4], 0.8).unwrap();
    let moments = |integ| {
        let samples: Vec<Vec<f64>> =
            (0..400).map(|s| sample_prior(&prior, 4, &config(100, integ, s)).unwrap()).collect();
        let var: f64 = samples.iter().flatten().map(|v| v * v).sum::<f64>() / (400.0 * 4.0);
        (var - 0.8).abs()
    };
    assert!(moments(Integrator::Heun) <= moments(Integrator::Euler));
}

#[test]
fn posterior_score_matches_product_density_differences() {
    let p1 = GaussianPrior::new(vec![0.3, -0.1, 0.5], 0.6).unwrap();
    let p2 = MixturePrior::new(vec![(0.4, vec![1.0, 0.0, -1.0], 0.2), (0.6, vec![-0.5, 0.5, 0.2], 0.4)]).unwrap();
    let models: Vec<&dyn ScoreModel<f64>> = vec![&p1, &p2];
    let x = [0.7, -0.4, 0.1];
    let s2 = vec![0.2, 0.3, -0.6];
    let sigma = 0.37;
    let log_post = |s: &[f64]| {
        let r: Vec<f64> = x.iter().zip(s).map(|(a, b)| a - b).collect();
        p2.log_density(s, sigma).unwrap() + p1.log_density(&r, sigma).unwrap()
    };
    let g = posterior_score(&models, &[s2.clone()], &x, sigma).unwrap();
    let h = 1e-5;
    for i in 0..3 {
        let mut up = s2.clone();
        up[i] += h;
        let mut down = s2.clone();
        down[i] -= h;
        let fd = (log_post(&up) - log_post(&down)) / (2.0 * h);
        assert!((g[0][i] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "coordinate {i}: {} vs {fd}", g[0][i]);
    }
}

#[test]
fn standard_gaussian_pair_posterior_mean() {
    let p = GaussianPrior::new(vec![0.0], 1.0).unwrap();
    let models: Vec<&dyn ScoreModel<f64>> = vec![&p, &p];
    let prob = problem(vec![2.0], 2);
    let draws: Vec<f64> = (0..2000)
        .map(|s| sample_posterior(&prob, &models, &config(100, Integrator::Heun, s), &[]).unwrap()[1][0])
        .collect();
    let mean = draws.iter().sum::<f64>() / 2000.0;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 1999.0;
    assert!((mean - 1.0).abs() < 3.0 * (var / 2000.0).sqrt(), "mean {mean}");
}

#[test]
fn full_teacher_forcing_returns_ground_truth() {
    let p = GaussianPrior::new(vec![0.0; 32], 1.0).unwrap();
    let models: Vec<&dyn ScoreModel<f64>> = vec![&p, &p];
    let mut r = seeded(11);
    let truth: Vec<f64> = (0..32).map(|_| standard_normal(&mut r)).collect();
    let other: Vec<f64> = (0..32).map(|_| standard_normal(&mut r)).collect();
    let x: Vec<f64> = truth.iter().zip(&other).map(|(a, b)| a + b).collect();
    let cond = InpaintCondition::new(vec![true; 32], truth.clone(), ConditionMode::TeacherForcing).unwrap();
    let out = sample_posterior(&problem(x, 2), &models, &config(50, Integrator::Heun, 4), &[Some(cond)]).unwrap();
    for (a, b) in out[1].iter().zip(&truth) {
        assert!((a - b).abs() < 3.0 * 0.01);
    }
}

#[test]
fn inpaint_noise_has_unit_variance_at_unit_sigma() {
    let n = 10_000;
    let values: Vec<f64> = (0..n).map(|i| (i as f64 * 0.01).sin()).collect();
    let cond = InpaintCondition::new(vec![true; n], values.clone(), ConditionMode::PreviousEstimate).unwrap();
    let mut state = vec![0.0; n];
    apply_inpaint(&mut state, &cond, 1.0, &mut seeded(5)).unwrap();
    let var = state.iter().zip(&values).map(|(s, v)| (s - v).powi(2)).sum::<f64>() / n as f64;
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
}

#[test]
fn tweedie_of_gaussian_denoiser_is_the_gaussian_score() {
    let mean = vec![0.4, -1.2, 0.0, 2.0];
    let v = 0.7;
    let prior = GaussianPrior::new(mean.clone(), v).unwrap();
    let x = [1.0, 0.5, -0.3, 2.2];
    for &sigma in &[0.05, 0.5, 3.0] {
        let s2 = sigma * sigma;
        let denoised: Vec<f64> = x.iter().zip(&mean).map(|(xi, m)| m + v / (v + s2) * (xi - m)).collect();
        let via = denoiser_to_score(&denoised, &x, sigma).unwrap();
        let direct = gaussian_score(&prior, &x, sigma).unwrap();
        for (a, b) in via.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn posterior_sources_sum_to_the_mixture(seed in any::<u64>(), n in 2usize..4, len in 1usize..16) {
        let mut r = seeded(derive_seed(seed, &[1]));
        let x: Vec<f64> = (0..len).map(|_| r.gen_range(-2.0..2.0)).collect();
        let p = GaussianPrior::new(vec![0.0; len], 1.0).unwrap();
        let models: Vec<&dyn ScoreModel<f64>> = vec![&p; n];
        let out = sample_posterior(&problem(x.clone(), n), &models, &config(8, Integrator::Heun, seed), &[]).unwrap();
        prop_assert_eq!(out.len(), n);
        for t in 0..len {
            let sum: f64 = out.iter().map(|s| s[t]).sum();
            prop_assert!((sum - x[t]).abs() <= 1e-12 * (1.0 + x[t].abs() + out.iter().map(|s| s[t].abs()).sum::<f64>()));
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed(seed in any::<u64>()) {
        let p = GaussianPrior::new(vec![0.5; 6], 2.0).unwrap();
        let a = sample_prior(&p, 6, &config(10, Integrator::Heun, seed)).unwrap();
        let b = sample_prior(&p, 6, &config(10, Integrator::Heun, seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}
