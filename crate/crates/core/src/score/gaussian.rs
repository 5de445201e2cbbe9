use super::{check_sigma, ScoreModel};
use crate::error::{ensure, Error, Result};
use crate::scalar::{energy, log_sum_exp, Real};

/// Isotropic Gaussian prior `N(mean, variance·I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior<T: Real> {
    mean: Vec<T>,
    variance: T,
}

impl<T: Real> GaussianPrior<T> {
    pub fn new(mean: Vec<T>, variance: T) -> Result<Self> {
        ensure!(!mean.is_empty(), Shape, "prior mean is empty");
        ensure!(variance > T::zero() && variance.is_finite(), Config, "variance must be positive");
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn variance(&self) -> T {
        self.variance
    }
}

fn check_len<T>(x: &[T], n: usize) -> Result<()> {
    ensure!(x.len() == n, Shape, "state length {} does not match model length {}", x.len(), n);
    Ok(())
}

fn gaussian_log_density<T: Real>(x: &[T], mean: &[T], var: T) -> T {
    let d2: T = x.iter().zip(mean).map(|(&a, &m)| (a - m) * (a - m)).sum();
    let half = T::of(0.5);
    -half * d2 / var - half * T::of_usize(x.len()) * (T::TAU() * var).ln()
}

pub fn gaussian_score<T: Real>(prior: &GaussianPrior<T>, x: &[T], sigma: T) -> Result<Vec<T>> {
    check_sigma(sigma)?;
    check_len(x, prior.mean.len())?;
    let v = prior.variance + sigma * sigma;
    Ok(x.iter().zip(&prior.mean).map(|(&a, &m)| -(a - m) / v).collect())
}

impl<T: Real> ScoreModel<T> for GaussianPrior<T> {
    fn score(&self, x: &[T], sigma: T) -> Result<Vec<T>> {
        gaussian_score(self, x, sigma)
    }

    fn log_density(&self, x: &[T], sigma: T) -> Result<T> {
        check_sigma(sigma)?;
        check_len(x, self.mean.len())?;
        Ok(gaussian_log_density(x, &self.mean, self.variance + sigma * sigma))
    }

    fn native_length(&self) -> Option<usize> {
        Some(self.mean.len())
    }
}

/// Weighted mixture of isotropic Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePrior<T: Real> {
    weights: Vec<T>,
    means: Vec<Vec<T>>,
    variances: Vec<T>,
}

impl<T: Real> MixturePrior<T> {
    /// Components are `(weight, mean, variance)`; weights must already sum to one.
    pub fn new(components: Vec<(T, Vec<T>, T)>) -> Result<Self> {
        ensure!(!components.is_empty(), Config, "mixture prior needs at least one component");
        let dim = components[0].1.len();
        ensure!(dim > 0, Shape, "component means are empty");
        let mut total = 0.0;
        for (w, m, v) in &components {
            ensure!(*w > T::zero(), Config, "component weights must be positive");
            ensure!(*v > T::zero() && v.is_finite(), Config, "component variances must be positive");
            ensure!(m.len() == dim, Shape, "component means differ in length");
            total += w.as_f64();
        }
        let tol = if std::mem::size_of::<T>() == 4 { 1e-5 } else { 1e-12 };
        ensure!((total - 1.0).abs() <= tol, Config, "weights sum to {total}, expected 1");
        let (weights, rest): (Vec<T>, Vec<(Vec<T>, T)>) =
            components.into_iter().map(|(w, m, v)| (w, (m, v))).unzip();
        let (means, variances) = rest.into_iter().unzip();
        Ok(Self { weights, means, variances })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<T>] {
        &self.means
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    fn component_log_densities(&self, x: &[T], sigma: T) -> Vec<T> {
        self.means
            .iter()
            .zip(&self.variances)
            .zip(&self.weights)
            .map(|((m, &v), &w)| w.ln() + gaussian_log_density(x, m, v + sigma * sigma))
            .collect()
    }
}

pub fn mixture_score<T: Real>(prior: &MixturePrior<T>, x: &[T], sigma: T) -> Result<Vec<T>> {
    check_sigma(sigma)?;
    check_len(x, prior.dim())?;
    let logs = prior.component_log_densities(x, sigma);
    let lse = log_sum_exp(&logs);
    let mut out = vec![T::zero(); x.len()];
    for ((l, m), &v) in logs.iter().zip(&prior.means).zip(&prior.variances) {
        let r = (*l - lse).exp();
        if r == T::zero() {
            continue;
        }
        let c = r / (v + sigma * sigma);
        for ((o, &a), &mu) in out.iter_mut().zip(x).zip(m) {
            *o -= c * (a - mu);
        }
    }
    Ok(out)
}

impl<T: Real> ScoreModel<T> for MixturePrior<T> {
    fn score(&self, x: &[T], sigma: T) -> Result<Vec<T>> {
        mixture_score(self, x, sigma)
    }

    fn log_density(&self, x: &[T], sigma: T) -> Result<T> {
        check_sigma(sigma)?;
        check_len(x, self.dim())?;
        Ok(log_sum_exp(&self.component_log_densities(x, sigma)))
    }

    fn native_length(&self) -> Option<usize> {
        Some(self.dim())
    }
}

/// Uniform-weight Gaussian KDE over `exemplars`. Bandwidth defaults to 0.1 times the bank RMS.
pub fn kde_prior_from_exemplars<T: Real>(
    exemplars: &[Vec<T>],
    bandwidth: Option<T>,
) -> Result<MixturePrior<T>> {
    ensure!(!exemplars.is_empty(), Config, "exemplar bank is empty");
    let len = exemplars[0].len();
    if exemplars.iter().any(|e| e.len() != len) {
        return Err(Error::Shape("exemplars differ in length".into()));
    }
    let h = match bandwidth {
        Some(h) => h,
        None => {
            let total: T = exemplars.iter().map(|e| energy(e)).sum();
            T::of(0.1) * (total / T::of_usize(len * exemplars.len())).sqrt()
        }
    };
    ensure!(h > T::zero() && h.is_finite(), Config, "bandwidth must be positive");
    let w = T::one() / T::of_usize(exemplars.len());
    MixturePrior::new(exemplars.iter().map(|e| (w, e.clone(), h * h)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn gaussian_examples() {
        let p = GaussianPrior::new(vec![0.3, -0.2], 2.0).unwrap();
        assert_eq!(gaussian_score(&p, &[0.3, -0.2], 1.0).unwrap(), vec![0.0, 0.0]);
        let q = GaussianPrior::new(vec![0.0], 1.0).unwrap();
        assert_eq!(gaussian_score(&q, &[2.0], 0.0).unwrap(), vec![-2.0]);
        assert!(matches!(gaussian_score(&q, &[2.0, 1.0], 0.0), Err(Error::Shape(_))));
    }

    #[test]
    fn mixture_examples() {
        let m = MixturePrior::new(vec![(0.5f64, vec![1.0], 0.3), (0.5, vec![-1.0], 0.3)]).unwrap();
        assert!(mixture_score(&m, &[0.0], 0.2).unwrap()[0].abs() < 1e-15);
        let single = MixturePrior::new(vec![(1.0, vec![0.4, 0.1], 0.7)]).unwrap();
        let g = GaussianPrior::new(vec![0.4, 0.1], 0.7).unwrap();
        let x = [1.2, -0.5];
        assert_eq!(mixture_score(&single, &x, 0.3).unwrap(), gaussian_score(&g, &x, 0.3).unwrap());
        assert!(MixturePrior::<f64>::new(vec![]).is_err());
        assert!(MixturePrior::new(vec![(0.4, vec![0.0], 1.0)]).is_err());
    }

    #[test]
    fn mixture_is_stable_far_from_modes() {
        let m = MixturePrior::new(vec![(0.5f64, vec![0.0; 4], 1e-4), (0.5, vec![1.0; 4], 1e-4)]).unwrap();
        let s = mixture_score(&m, &[1e3; 4], 0.0).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
        assert!(m.log_density(&[1e3; 4], 0.0).unwrap().is_finite());
    }

    #[test]
    fn kde_construction() {
        let one = kde_prior_from_exemplars(&[vec![1.0, 2.0]], Some(0.5)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.means()[0], vec![1.0, 2.0]);
        assert_eq!(one.variances()[0], 0.25);
        let mut r = rng::seeded(1);
        let bank: Vec<Vec<f64>> =
            (0..7).map(|_| (0..5).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let kde = kde_prior_from_exemplars(&bank, None).unwrap();
        assert_eq!(kde.len(), 7);
        assert!(kde.weights().iter().all(|&w| (w - 1.0 / 7.0).abs() < 1e-15));
        assert!(kde_prior_from_exemplars::<f64>(&[], None).is_err());
    }

    #[test]
    fn kde_score_vanishes_on_isolated_exemplar() {
        let bank = vec![vec![0.0f64, 0.0], vec![5.0, 5.0], vec![-5.0, 5.0]];
        let kde = kde_prior_from_exemplars(&bank, Some(0.05)).unwrap();
        let s = kde.score(&[5.0, 5.0], 0.0).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-9));
    }
}
