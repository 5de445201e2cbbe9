use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{ensure, Result};
use crate::rng;

/// Floor used inside every division of the multiplicative updates.
pub const NMF_EPS: f64 = 1e-12;

/// Nonnegative factorization `V ≈ W H` with each component owned by one source.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfModel {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub source_of_component: Vec<usize>,
}

impl NmfModel {
    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn reconstruction(&self) -> Array2<f64> {
        self.w.dot(&self.h)
    }

    /// `W_i H_i` restricted to the components of `source`.
    pub fn source_part(&self, source: usize) -> Array2<f64> {
        let idx: Vec<usize> =
            (0..self.rank()).filter(|&k| self.source_of_component[k] == source).collect();
        self.w.select(Axis(1), &idx).dot(&self.h.select(Axis(0), &idx))
    }
}

/// Generalized KL divergence `D(V ‖ Λ)` with `Λ` floored by [`NMF_EPS`] inside the logarithm.
pub fn kl_divergence(v: &Array2<f64>, approx: &Array2<f64>) -> f64 {
    ndarray::Zip::from(v).and(approx).fold(0.0, |acc, &x, &y| {
        let log_term = if x > 0.0 { x * (x / (y + NMF_EPS)).ln() } else { 0.0 };
        acc + log_term - x + y
    })
}

/// One multiplicative update of `H`, then of `W`.
pub fn nmf_step(v: &Array2<f64>, w: &mut Array2<f64>, h: &mut Array2<f64>) {
    let ratio = v / &(w.dot(&*h) + NMF_EPS);
    let num = w.t().dot(&ratio);
    let den: Array1<f64> = w.sum_axis(Axis(0)).mapv(|s| s.max(NMF_EPS));
    *h *= &(num / &den.insert_axis(Axis(1)));
    let ratio = v / &(w.dot(&*h) + NMF_EPS);
    let num = ratio.dot(&h.t());
    let den: Array1<f64> = h.sum_axis(Axis(1)).mapv(|s| s.max(NMF_EPS));
    *w *= &(num / &den.insert_axis(Axis(0)));
}

#[derive(Debug, Clone, Default)]
pub struct NmfInit {
    pub w: Option<Array2<f64>>,
    pub h: Option<Array2<f64>>,
    pub source_of_component: Option<Vec<usize>>,
}

/// KL-NMF by multiplicative updates. Missing factors start uniform in `[0.1, 1.1)`.
pub fn nmf_fit(v: &Array2<f64>, rank: usize, iterations: usize, seed: u64, init: NmfInit) -> Result<NmfModel> {
    ensure!(rank >= 1, Config, "NMF rank must be at least 1");
    ensure!(v.iter().all(|&x| x >= 0.0 && x.is_finite()), Domain, "V must be finite and nonnegative");
    let (bins, frames) = v.dim();
    let mut r = rng::seeded(seed);
    let mut w = match init.w {
        Some(w) => {
            ensure!(w.dim() == (bins, rank), Shape, "initial W has shape {:?}", w.dim());
            w
        }
        None => Array2::from_shape_simple_fn((bins, rank), || r.gen_range(0.1..1.1)),
    };
    let mut h = match init.h {
        Some(h) => {
            ensure!(h.dim() == (rank, frames), Shape, "initial H has shape {:?}", h.dim());
            h
        }
        None => Array2::from_shape_simple_fn((rank, frames), || r.gen_range(0.1..1.1)),
    };
    ensure!(
        w.iter().chain(h.iter()).all(|&x| x >= 0.0),
        Domain,
        "initial factors must be nonnegative"
    );
    let source_of_component = init.source_of_component.unwrap_or_else(|| vec![0; rank]);
    ensure!(source_of_component.len() == rank, Shape, "one source index per component is required");
    for _ in 0..iterations {
        nmf_step(v, &mut w, &mut h);
    }
    Ok(NmfModel { w, h, source_of_component })
}
