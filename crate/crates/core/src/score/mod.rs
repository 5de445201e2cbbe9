//! Score functions of noise-smoothed priors.

mod bank;
mod gaussian;
mod spectral;

pub use bank::{load_bank_binary, load_bank_dir, save_bank_binary, ExemplarBank};
pub use gaussian::{gaussian_score, kde_prior_from_exemplars, mixture_score, GaussianPrior, MixturePrior};
pub use spectral::{SpectralKdePrior, SpectralPriorOptions};

use crate::error::{ensure, Result};
use crate::scalar::Real;

/// Gradient of `log p_σ(x)` for a prior smoothed by isotropic Gaussian noise of scale `σ`.
pub trait ScoreModel<T: Real>: Send + Sync {
    fn score(&self, x: &[T], sigma: T) -> Result<Vec<T>>;

    /// Closed-form `log p_σ(x)`, used to check `score` by finite differences.
    fn log_density(&self, x: &[T], sigma: T) -> Result<T>;

    /// Length the model is defined over, if it is fixed.
    fn native_length(&self) -> Option<usize> {
        None
    }

    fn accepts_length(&self, len: usize) -> bool {
        self.native_length().map_or(len > 0, |n| n == len)
    }
}

/// Converts a denoiser output into a score via Tweedie's formula.
pub fn denoiser_to_score<T: Real>(denoised: &[T], x: &[T], sigma: T) -> Result<Vec<T>> {
    ensure!(sigma > T::zero(), Domain, "denoiser conversion needs sigma > 0");
    ensure!(denoised.len() == x.len(), Shape, "denoised and state lengths differ");
    let s2 = sigma * sigma;
    Ok(denoised.iter().zip(x).map(|(&d, &v)| (d - v) / s2).collect())
}

pub(crate) fn check_sigma<T: Real>(sigma: T) -> Result<()> {
    ensure!(sigma >= T::zero() && sigma.is_finite(), Domain, "sigma must be finite and nonnegative");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tweedie_identity() {
        assert_eq!(denoiser_to_score(&[1.0, 2.0], &[1.0, 2.0], 0.5).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            denoiser_to_score(&[1.0], &[1.0], 0.0),
            Err(crate::Error::Domain(_))
        ));
        let prior = GaussianPrior::new(vec![0.5, -1.0, 2.0], 1.5).unwrap();
        let x = [0.1, 0.7, -3.0];
        let sigma: f64 = 0.8;
        let k = 1.5 / (1.5 + sigma * sigma);
        let denoised: Vec<f64> =
            x.iter().zip(prior.mean()).map(|(&xi, &m)| m + k * (xi - m)).collect();
        let via = denoiser_to_score(&denoised, &x, sigma).unwrap();
        let direct = prior.score(&x, sigma).unwrap();
        for (a, b) in via.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
