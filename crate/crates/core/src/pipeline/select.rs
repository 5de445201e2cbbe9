use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::metrics::{permutations, si_sdr};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Highest mean SI-SDR against the references, over candidates and source permutations.
    #[default]
    OracleSiSdr,
    /// Smallest mixture reconstruction error; needs no references.
    MixtureResidual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    pub index: usize,
    /// `permutation[i]` is the candidate source assigned to reference slot `i`.
    pub permutation: Vec<usize>,
    pub score: f64,
}

/// Picks the best of `candidates`, each a list of source estimates. Ties keep the first.
pub fn select_best_of_k<T: Real>(
    candidates: &[Vec<Vec<T>>],
    selection: Selection,
    references: Option<&[Vec<T>]>,
    mixture: &[T],
) -> Result<Selected> {
    ensure!(!candidates.is_empty(), Config, "no candidates to select from");
    let n = candidates[0].len();
    for c in candidates {
        ensure!(c.len() == n, Shape, "candidates differ in source count");
        for s in c {
            ensure!(s.len() == mixture.len(), Shape, "candidate length differs from the mixture");
        }
    }
    let mut best: Option<Selected> = None;
    match selection {
        Selection::OracleSiSdr => {
            let refs = references.ok_or_else(|| {
                crate::Error::Config("oracle selection requires reference sources".into())
            })?;
            ensure!(refs.len() == n, Shape, "{} references for {} sources", refs.len(), n);
            let active: Vec<usize> = (0..n)
                .filter(|&i| refs[i].iter().any(|v| *v != T::zero()))
                .collect();
            for (idx, cand) in candidates.iter().enumerate() {
                // table[i][j]: candidate source j scored against reference i
                let mut table = vec![vec![0.0; n]; n];
                for &i in &active {
                    for (j, s) in cand.iter().enumerate() {
                        table[i][j] = si_sdr(s, &refs[i])?;
                    }
                }
                for p in permutations(n) {
                    let score = if active.is_empty() {
                        0.0
                    } else {
                        active.iter().map(|&i| table[i][p[i]]).sum::<f64>() / active.len() as f64
                    };
                    if best.as_ref().map_or(true, |b| score > b.score) {
                        best = Some(Selected { index: idx, permutation: p, score });
                    }
                }
            }
        }
        Selection::MixtureResidual => {
            for (idx, cand) in candidates.iter().enumerate() {
                let err: f64 = (0..mixture.len())
                    .map(|t| {
                        let sum: f64 = cand.iter().map(|s| s[t].as_f64()).sum();
                        (mixture[t].as_f64() - sum).powi(2)
                    })
                    .sum();
                let score = -err.sqrt();
                if best.as_ref().map_or(true, |b| score > b.score) {
                    best = Some(Selected { index: idx, permutation: (0..n).collect(), score });
                }
            }
        }
    }
    Ok(best.expect("at least one candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn rv(r: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn single_candidate_is_chosen() {
        let mut r = rng::seeded(0);
        let c = vec![vec![rv(&mut r, 8), rv(&mut r, 8)]];
        let refs = vec![rv(&mut r, 8), rv(&mut r, 8)];
        let x = vec![0.0; 8];
        assert_eq!(select_best_of_k(&c, Selection::OracleSiSdr, Some(&refs), &x).unwrap().index, 0);
        assert_eq!(select_best_of_k(&c, Selection::MixtureResidual, None, &x).unwrap().index, 0);
        assert!(select_best_of_k(&c, Selection::OracleSiSdr, None, &x).is_err());
    }

    #[test]
    fn clean_candidate_dominates() {
        let mut r = rng::seeded(1);
        let refs = vec![rv(&mut r, 64), rv(&mut r, 64)];
        let noisy: Vec<Vec<f64>> =
            refs.iter().map(|s| s.iter().map(|v| v + 5.0 * r.gen_range(-1.0..1.0)).collect()).collect();
        let swapped = vec![refs[1].clone(), refs[0].clone()];
        let sel = select_best_of_k(&[noisy, swapped], Selection::OracleSiSdr, Some(&refs), &[0.0; 64]).unwrap();
        assert_eq!(sel.index, 1);
        assert_eq!(sel.permutation, vec![1, 0]);
    }

    #[test]
    fn zero_references_are_skipped() {
        let mut r = rng::seeded(4);
        let refs = vec![rv(&mut r, 16), vec![0.0; 16]];
        let c = vec![vec![rv(&mut r, 16), rv(&mut r, 16)], vec![refs[0].clone(), rv(&mut r, 16)]];
        let sel = select_best_of_k(&c, Selection::OracleSiSdr, Some(&refs), &[0.0; 16]).unwrap();
        assert_eq!(sel.index, 1);
        assert_eq!(sel.permutation[0], 0);
    }
}
