//! Separation quality metrics.

mod identity;

pub use identity::{envelope_features, envelope_prototype, identity_switch_rate, ENVELOPE_BANDS, ENVELOPE_FFT};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::scalar::Real;
use crate::signal::Waveform;

/// Ceiling applied to every ratio in dB; the floor is its negative.
pub const DB_CAP: f64 = 100.0;

fn ratio_db(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        return if num > 0.0 { DB_CAP } else { -DB_CAP };
    }
    if num <= 0.0 {
        return -DB_CAP;
    }
    (10.0 * (num / den).log10()).clamp(-DB_CAP, DB_CAP)
}

fn check_pair<T: Real>(estimate: &[T], reference: &[T]) -> Result<f64> {
    ensure!(
        estimate.len() == reference.len(),
        Shape,
        "estimate has {} samples, reference {}",
        estimate.len(),
        reference.len()
    );
    let e: f64 = reference.iter().map(|v| v.as_f64().powi(2)).sum();
    ensure!(e > 0.0, Domain, "reference is identically zero");
    Ok(e)
}

/// Scale-invariant SDR in dB.
pub fn si_sdr<T: Real>(estimate: &[T], reference: &[T]) -> Result<f64> {
    let ref_energy = check_pair(estimate, reference)?;
    let cross: f64 = estimate.iter().zip(reference).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
    let alpha = cross / ref_energy;
    let mut target = 0.0;
    let mut resid = 0.0;
    for (a, b) in estimate.iter().zip(reference) {
        let t = alpha * b.as_f64();
        target += t * t;
        resid += (t - a.as_f64()).powi(2);
    }
    Ok(ratio_db(target, resid))
}

/// Plain SDR in dB, without scale projection.
pub fn sdr<T: Real>(estimate: &[T], reference: &[T]) -> Result<f64> {
    let ref_energy = check_pair(estimate, reference)?;
    let resid: f64 =
        estimate.iter().zip(reference).map(|(a, b)| (b.as_f64() - a.as_f64()).powi(2)).sum();
    Ok(ratio_db(ref_energy, resid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceMetrics {
    pub si_sdr: f64,
    pub sdr: f64,
    pub si_sdri: f64,
    pub sdri: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Indexed by reference.
    pub per_source: Vec<SourceMetrics>,
    /// `permutation[i]` is the estimate matched to reference `i`.
    pub permutation: Vec<usize>,
    pub identity_switch_rate: Option<f64>,
}

impl EvalReport {
    pub fn mean_si_sdri(&self) -> f64 {
        mean(self.per_source.iter().map(|m| m.si_sdri))
    }

    pub fn mean_sdri(&self) -> f64 {
        mean(self.per_source.iter().map(|m| m.sdri))
    }

    pub fn mean_si_sdr(&self) -> f64 {
        mean(self.per_source.iter().map(|m| m.si_sdr))
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len();
    v.sum::<f64>() / n as f64
}

/// All assignments of `n` estimates to `n` references.
pub fn permutations(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).permutations(n)
}

/// Permutation-invariant evaluation against `references`, with improvements measured over
/// using the mixture itself as every estimate.
pub fn evaluate<T: Real>(
    estimates: &[Waveform<T>],
    references: &[Waveform<T>],
    mixture: &Waveform<T>,
) -> Result<EvalReport> {
    let n = references.len();
    ensure!(n >= 1, Shape, "no references given");
    ensure!(estimates.len() == n, Shape, "{} estimates for {} references", estimates.len(), n);
    let mut table = vec![vec![0.0; n]; n];
    for (i, r) in references.iter().enumerate() {
        ensure!(r.len() == mixture.len(), Shape, "reference and mixture lengths differ");
        for (j, e) in estimates.iter().enumerate() {
            table[i][j] = si_sdr(e.samples(), r.samples())?;
        }
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for p in permutations(n) {
        let s: f64 = p.iter().enumerate().map(|(i, &j)| table[i][j]).sum::<f64>() / n as f64;
        if best.as_ref().map_or(true, |(b, _)| s > *b) {
            best = Some((s, p));
        }
    }
    let permutation = best.expect("at least one permutation").1;
    let per_source = references
        .iter()
        .zip(&permutation)
        .map(|(r, &j)| {
            let e = estimates[j].samples();
            let base_si = si_sdr(mixture.samples(), r.samples())?;
            let base_sdr = sdr(mixture.samples(), r.samples())?;
            let si = si_sdr(e, r.samples())?;
            let sd = sdr(e, r.samples())?;
            Ok(SourceMetrics { si_sdr: si, sdr: sd, si_sdri: si - base_si, sdri: sd - base_sdr })
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport { per_source, permutation, identity_switch_rate: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn rand_vec(r: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn si_sdr_examples() {
        let s = vec![1.0, -2.0, 0.5, 3.0];
        assert_eq!(si_sdr(&s, &s).unwrap(), DB_CAP);
        let s3: Vec<f64> = s.iter().map(|v| 3.0 * v).collect();
        assert_eq!(si_sdr(&s3, &s).unwrap(), DB_CAP);
        let e = vec![1.0, 1.0];
        let r = vec![1.0, 0.0];
        assert!(si_sdr(&e, &r).unwrap().abs() < 1e-12);
        assert!(matches!(si_sdr(&[1.0], &[0.0]), Err(crate::Error::Domain(_))));
        assert!(matches!(si_sdr(&[1.0, 2.0], &[1.0]), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn sdr_examples() {
        let s = vec![1.0, -2.0, 0.5];
        assert_eq!(sdr(&s, &s).unwrap(), DB_CAP);
        let s2: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        assert!(sdr(&s2, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn projection_removes_scale_error() {
        let mut r = rng::seeded(2);
        let s = rand_vec(&mut r, 64);
        let mut e = rand_vec(&mut r, 64);
        let proj = crate::scalar::dot(&e, &s) / crate::scalar::dot(&s, &s);
        for (ev, sv) in e.iter_mut().zip(&s) {
            *ev -= proj * sv;
        }
        let est: Vec<f64> = s.iter().zip(&e).map(|(a, b)| 1.7 * a + 0.2 * b).collect();
        assert!(si_sdr(&est, &s).unwrap() >= sdr(&est, &s).unwrap());
    }

    fn wf(v: Vec<f64>) -> Waveform<f64> {
        Waveform::new(v, 8000).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let mut r = rng::seeded(8);
        let a = rand_vec(&mut r, 100);
        let b = rand_vec(&mut r, 100);
        let x: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        let refs = vec![wf(a.clone()), wf(b.clone())];
        let rep = evaluate(&refs, &refs, &wf(x.clone())).unwrap();
        assert_eq!(rep.permutation, vec![0, 1]);
        for (m, rf) in rep.per_source.iter().zip(&refs) {
            assert_eq!(m.si_sdr, DB_CAP);
            assert!((m.si_sdri - (DB_CAP - si_sdr(&x, rf.samples()).unwrap())).abs() < 1e-12);
        }
        let swapped = vec![wf(b), wf(a)];
        let rep2 = evaluate(&swapped, &refs, &wf(x.clone())).unwrap();
        assert_eq!(rep2.permutation, vec![1, 0]);
        assert_eq!(rep2.per_source, rep.per_source);
        assert!(evaluate(&refs[..1], &refs, &wf(x)).is_err());
    }
}
