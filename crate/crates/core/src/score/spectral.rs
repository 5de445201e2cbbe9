use std::fmt;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use super::{check_sigma, ExemplarBank, ScoreModel};
use crate::error::{ensure, Result};
use crate::scalar::{log_sum_exp, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPriorOptions {
    /// Patch length; each patch is modeled as a stationary Gaussian.
    pub patch: usize,
    /// Patches inside one window share a latent identity. Must be a multiple of `patch`.
    pub window: usize,
    /// Isotropic floor added to every exemplar spectrum. Defaults to 0.1 times the bank RMS.
    pub bandwidth: Option<f64>,
    /// Smooth exemplar periodograms with a 3-tap [1/4, 1/2, 1/4] kernel.
    pub smoothing: bool,
}

impl Default for SpectralPriorOptions {
    fn default() -> Self {
        Self { patch: 256, window: 8192, bandwidth: None, smoothing: true }
    }
}

struct Class<T> {
    /// Exemplar power spectra, `k × bins`, row-major.
    spectra: Vec<T>,
    k: usize,
    log_weight: T,
}

/// Exemplar prior over spectral envelopes.
///
/// Each exemplar patch defines a zero-mean circulant Gaussian whose eigenvalues are its
/// (smoothed) periodogram plus an isotropic floor. Within a window, every patch shares one
/// identity drawn from the bank's identities, and each patch picks its own exemplar of that
/// identity. Windows are independent.
pub struct SpectralKdePrior<T: Real> {
    patch: usize,
    window: usize,
    bins: usize,
    floor: T,
    classes: Vec<Class<T>>,
    mult: Vec<T>,
    forward: Arc<dyn RealToComplex<T>>,
    inverse: Arc<dyn ComplexToReal<T>>,
}

impl<T: Real> fmt::Debug for SpectralKdePrior<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralKdePrior")
            .field("patch", &self.patch)
            .field("window", &self.window)
            .field("floor", &self.floor)
            .field("identities", &self.classes.len())
            .finish()
    }
}

// Per-sigma tables for one class.
struct Tables<T> {
    inv: Vec<T>,
    weighted_inv: Vec<T>,
    half_logdet: Vec<T>,
}

impl<T: Real> SpectralKdePrior<T> {
    pub fn from_bank(bank: &ExemplarBank<T>, opts: SpectralPriorOptions) -> Result<Self> {
        let p = opts.patch;
        ensure!(p >= 1, Config, "patch length must be positive");
        ensure!(
            opts.window >= p && opts.window % p == 0,
            Config,
            "window {} must be a positive multiple of the patch length {}",
            opts.window,
            p
        );
        ensure!(
            bank.exemplar_len() % p == 0,
            Shape,
            "exemplar length {} is not a multiple of the patch length {}",
            bank.exemplar_len(),
            p
        );
        let h = opts.bandwidth.map_or_else(|| T::of(0.1) * bank.rms(), T::of);
        ensure!(h > T::zero() && h.is_finite(), Config, "bandwidth must be positive");

        let mut planner = RealFftPlanner::<T>::new();
        let forward = planner.plan_fft_forward(p);
        let inverse = planner.plan_fft_inverse(p);
        let bins = p / 2 + 1;
        let mut mult = vec![T::of(2.0); bins];
        mult[0] = T::one();
        if p % 2 == 0 {
            mult[bins - 1] = T::one();
        }

        let mut buf = forward.make_input_vec();
        let mut spec = forward.make_output_vec();
        let n_ids = bank.identities().len();
        let mut classes = Vec::with_capacity(n_ids);
        let mut counts = Vec::with_capacity(n_ids);
        for c in 0..n_ids {
            let mut spectra = Vec::new();
            let mut k = 0;
            for e in bank.of_identity(c) {
                for chunk in e.chunks_exact(p) {
                    buf.copy_from_slice(chunk);
                    forward.process(&mut buf, &mut spec).expect("fft buffer sizes");
                    let power: Vec<T> =
                        spec.iter().map(|z| z.norm_sqr() / T::of_usize(p)).collect();
                    spectra.extend(if opts.smoothing { smooth(&power, p) } else { power });
                    k += 1;
                }
            }
            counts.push(k);
            classes.push(Class { spectra, k, log_weight: T::zero() });
        }
        let total: usize = counts.iter().sum();
        for c in &mut classes {
            // identities are weighted by their share of the bank
            c.log_weight = (T::of_usize(c.k) / T::of_usize(total)).ln();
        }
        Ok(Self { patch: p, window: opts.window, bins, floor: h * h, classes, mult, forward, inverse })
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn identities(&self) -> usize {
        self.classes.len()
    }

    fn tables(&self, sigma: T) -> Vec<Tables<T>> {
        let s2 = sigma * sigma;
        let pf = T::of_usize(self.patch);
        let half = T::of(0.5);
        let log2pi = T::TAU().ln();
        self.classes
            .iter()
            .map(|c| {
                let mut inv = Vec::with_capacity(c.spectra.len());
                let mut weighted_inv = Vec::with_capacity(c.spectra.len());
                let mut half_logdet = Vec::with_capacity(c.k);
                for row in c.spectra.chunks_exact(self.bins) {
                    let mut ld = T::zero();
                    for (&s, &m) in row.iter().zip(&self.mult) {
                        let lam = s + self.floor + s2;
                        let i = T::one() / lam;
                        inv.push(i);
                        weighted_inv.push(m * i / pf);
                        ld += m * lam.ln();
                    }
                    half_logdet.push(half * (ld + pf * log2pi));
                }
                Tables { inv, weighted_inv, half_logdet }
            })
            .collect()
    }

    fn check(&self, x: &[T], sigma: T) -> Result<()> {
        check_sigma(sigma)?;
        ensure!(
            !x.is_empty() && x.len() % self.patch == 0,
            Shape,
            "state length {} is not a positive multiple of the patch length {}",
            x.len(),
            self.patch
        );
        Ok(())
    }

    /// Log-density of one window and, when `grad` is given, its gradient.
    fn window_eval(&self, x: &[T], tables: &[Tables<T>], grad: Option<&mut [T]>) -> T {
        let p = self.patch;
        let bins = self.bins;
        let n_patches = x.len() / p;
        let mut buf = self.forward.make_input_vec();
        let mut spectra = vec![Complex::new(T::zero(), T::zero()); n_patches * bins];
        for (chunk, out) in x.chunks_exact(p).zip(spectra.chunks_exact_mut(bins)) {
            buf.copy_from_slice(chunk);
            self.forward.process(&mut buf, out).expect("fft buffer sizes");
        }
        let power: Vec<T> = spectra.iter().map(|z| z.norm_sqr()).collect();

        let want_grad = grad.is_some();
        let mut class_ll = Vec::with_capacity(self.classes.len());
        // per class, per patch: responsibility-weighted inverse eigenvalues
        let mut class_inv: Vec<Vec<T>> = Vec::new();
        let mut logs = Vec::new();
        for (c, t) in self.classes.iter().zip(tables) {
            let log_k = T::of_usize(c.k).ln();
            let mut ll = c.log_weight;
            let mut acc = if want_grad { vec![T::zero(); n_patches * bins] } else { Vec::new() };
            for (pi, a) in power.chunks_exact(bins).enumerate() {
                logs.clear();
                logs.extend(
                    t.weighted_inv
                        .chunks_exact(bins)
                        .zip(&t.half_logdet)
                        .map(|(w, &hd)| -T::of(0.5) * fast_dot(a, w) - hd),
                );
                let lse = log_sum_exp(&logs);
                ll += lse - log_k;
                if want_grad {
                    let g = &mut acc[pi * bins..(pi + 1) * bins];
                    for (l, inv) in logs.iter().zip(t.inv.chunks_exact(bins)) {
                        let r = (*l - lse).exp();
                        if r > T::of(1e-12) {
                            for (gv, &iv) in g.iter_mut().zip(inv) {
                                *gv += r * iv;
                            }
                        }
                    }
                }
            }
            class_ll.push(ll);
            class_inv.push(acc);
        }
        let total = log_sum_exp(&class_ll);
        if let Some(grad) = grad {
            let mut g = vec![T::zero(); n_patches * bins];
            for (ll, acc) in class_ll.iter().zip(&class_inv) {
                let rc = (*ll - total).exp();
                if rc > T::of(1e-12) {
                    for (gv, &a) in g.iter_mut().zip(acc) {
                        *gv += rc * a;
                    }
                }
            }
            let scale = -T::one() / T::of_usize(p);
            let mut ibuf = self.inverse.make_input_vec();
            let mut scratch = self.inverse.make_output_vec();
            for (pi, out) in grad.chunks_exact_mut(p).enumerate() {
                let z = &spectra[pi * bins..(pi + 1) * bins];
                let gg = &g[pi * bins..(pi + 1) * bins];
                for ((b, &zv), &gv) in ibuf.iter_mut().zip(z).zip(gg) {
                    *b = zv * gv;
                }
                ibuf[0].im = T::zero();
                if p % 2 == 0 {
                    ibuf[bins - 1].im = T::zero();
                }
                self.inverse.process(&mut ibuf, &mut scratch).expect("fft buffer sizes");
                for (o, &v) in out.iter_mut().zip(&scratch) {
                    *o = v * scale;
                }
            }
        }
        total
    }
}

/// Circular 3-tap smoothing of a one-sided spectrum, using the symmetry of the full spectrum.
fn smooth<T: Real>(s: &[T], p: usize) -> Vec<T> {
    let bins = s.len();
    let full = |i: isize| -> T {
        let i = i.rem_euclid(p as isize) as usize;
        s[if i < bins { i } else { p - i }]
    };
    let (q, h) = (T::of(0.25), T::of(0.5));
    (0..bins as isize).map(|f| q * full(f - 1) + h * full(f) + q * full(f + 1)).collect()
}

fn fast_dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    acc.iter().copied().sum::<T>() + tail
}

impl<T: Real> ScoreModel<T> for SpectralKdePrior<T> {
    fn score(&self, x: &[T], sigma: T) -> Result<Vec<T>> {
        self.check(x, sigma)?;
        let tables = self.tables(sigma);
        let mut out = vec![T::zero(); x.len()];
        for (xw, ow) in x.chunks(self.window).zip(out.chunks_mut(self.window)) {
            self.window_eval(xw, &tables, Some(ow));
        }
        Ok(out)
    }

    fn log_density(&self, x: &[T], sigma: T) -> Result<T> {
        self.check(x, sigma)?;
        let tables = self.tables(sigma);
        Ok(x.chunks(self.window).map(|w| self.window_eval(w, &tables, None)).sum())
    }

    fn accepts_length(&self, len: usize) -> bool {
        len > 0 && len % self.patch == 0
    }
}
