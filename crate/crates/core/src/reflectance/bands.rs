//! Exhaustive band-set selection: which (illuminant, channel) subsets carry
//! the spectral information.

use super::{solve_point, ForwardOperator, PairObservation};
use crate::error::{Error, Result};
use crate::spectral::{BandIndex, SpectralCurve};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct BandSelection {
    pub k: usize,
    pub bands: Vec<BandIndex>,
    /// Mean spectral RMSE over the chart patches at the optimum.
    pub rmse: f64,
}

/// Search all `C(n_bands, k)` subsets; for each, solve every chart patch
/// restricted to those bands and score by mean spectral RMSE against ground
/// truth. Returns the argmin (first in lexicographic order on ties).
pub fn select_bands(
    op: &ForwardOperator,
    patch_observations: &[Vec<PairObservation>],
    ground_truth: &[SpectralCurve],
    k: usize,
) -> Result<BandSelection> {
    if patch_observations.len() != ground_truth.len() {
        return Err(Error::argument("observations and ground truth must align".to_string()));
    }
    if k == 0 || k > op.n_bands {
        return Err(Error::argument(format!(
            "band count must be in 1..={}, got {k}",
            op.n_bands
        )));
    }

    let combos = combinations(op.n_bands, k);
    let scored: Vec<(f64, usize)> = combos
        .par_iter()
        .enumerate()
        .map(|(idx, combo)| {
            let bands: Vec<BandIndex> = combo.iter().map(|&b| BandIndex::from_flat(b)).collect();
            let score = mean_chart_rmse(op, patch_observations, ground_truth, &bands)
                .unwrap_or(f64::INFINITY);
            (score, idx)
        })
        .collect();

    let (rmse, best_idx) = scored
        .into_iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
        .expect("at least one combination");
    Ok(BandSelection {
        k,
        bands: combos[best_idx].iter().map(|&b| BandIndex::from_flat(b)).collect(),
        rmse,
    })
}

/// Mean (over patches) spectral RMSE of the restricted solve.
pub fn mean_chart_rmse(
    op: &ForwardOperator,
    patch_observations: &[Vec<PairObservation>],
    ground_truth: &[SpectralCurve],
    bands: &[BandIndex],
) -> Result<f64> {
    let mut total = 0.0;
    for (obs, truth) in patch_observations.iter().zip(ground_truth) {
        let est = solve_point(op, obs, Some(bands), None)?;
        total += spectral_rmse(&est.reflectance, truth);
    }
    Ok(total / patch_observations.len() as f64)
}

pub fn spectral_rmse(a: &SpectralCurve, b: &SpectralCurve) -> f64 {
    let n = a.values.len().min(b.values.len());
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    (sum / n as f64).sqrt()
}

/// All k-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // next lexicographic combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_counts_match_binomials() {
        assert_eq!(combinations(5, 1).len(), 5);
        assert_eq!(combinations(5, 3).len(), 10);
        assert_eq!(combinations(21, 2).len(), 210);
        assert_eq!(combinations(4, 4).len(), 1);
    }

    #[test]
    fn combinations_are_lexicographic_and_distinct() {
        let c = combinations(6, 3);
        for w in c.windows(2) {
            assert!(w[0] < w[1], "{:?} !< {:?}", w[0], w[1]);
        }
        for combo in &c {
            for pair in combo.windows(2) {
                assert!(pair[0] < pair[1]);
            }
        }
    }
}
