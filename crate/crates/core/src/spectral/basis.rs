//! Low-dimensional linear reflectance model fitted by PCA.

use super::{SpectralCurve, WavelengthGrid};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Whether PCA runs on raw curves or mean-centered ones.
///
/// With `Zero` the reconstruction is literally `B·α`; with `Centered` the
/// sample mean is stored and added back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisMean {
    Zero,
    Centered,
}

/// Orthonormal reflectance basis: columns of `basis` are principal directions
/// sorted by descending explained variance.
#[derive(Debug, Clone)]
pub struct BasisModel {
    pub grid: WavelengthGrid,
    /// `N_λ × N_b`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Added back on reconstruction; `None` for raw (uncentered) PCA.
    pub mean: Option<SpectralCurve>,
    /// Variance captured by each retained direction, descending.
    pub explained_variance: Vec<f64>,
}

impl BasisModel {
    pub fn n_basis(&self) -> usize {
        self.basis.ncols()
    }

    /// `B·α (+ mean)`. Not clamped: estimated curves may leave `[0, 1]`.
    pub fn reconstruct(&self, alpha: &DVector<f64>) -> Result<SpectralCurve> {
        if alpha.len() != self.n_basis() {
            return Err(Error::argument(format!(
                "coefficient vector has {} entries, basis has {} columns",
                alpha.len(),
                self.n_basis()
            )));
        }
        let mut values = self.basis.clone() * alpha;
        if let Some(mean) = &self.mean {
            for (v, m) in values.iter_mut().zip(&mean.values) {
                *v += m;
            }
        }
        SpectralCurve::new(self.grid, values.iter().copied().collect())
    }

    /// Least-squares coefficients for a curve: `Bᵀ(r − mean)` since the
    /// columns are orthonormal.
    pub fn project(&self, curve: &SpectralCurve) -> Result<DVector<f64>> {
        if curve.grid != self.grid {
            return Err(Error::config("curve grid differs from basis grid".to_string()));
        }
        let mut v = DVector::from_column_slice(&curve.values);
        if let Some(mean) = &self.mean {
            for (x, m) in v.iter_mut().zip(&mean.values) {
                *x -= m;
            }
        }
        Ok(self.basis.transpose() * v)
    }
}

/// Principal component basis of a reflectance sample set.
pub fn fit_basis(samples: &[SpectralCurve], n_basis: usize, mean: BasisMean) -> Result<BasisModel> {
    let first = samples
        .first()
        .ok_or_else(|| Error::argument("fit_basis needs at least one sample".to_string()))?;
    let grid = first.grid;
    if samples.iter().any(|s| s.grid != grid) {
        return Err(Error::config("samples on different grids".to_string()));
    }
    let n_lambda = grid.count;
    if n_basis == 0 || n_basis > n_lambda.min(samples.len()) {
        return Err(Error::argument(format!(
            "n_basis must be in 1..=min(N_lambda={}, samples={}), got {}",
            n_lambda,
            samples.len(),
            n_basis
        )));
    }

    let mean_curve = match mean {
        BasisMean::Zero => None,
        BasisMean::Centered => {
            let mut acc = vec![0.0; n_lambda];
            for s in samples {
                for (a, v) in acc.iter_mut().zip(&s.values) {
                    *a += v;
                }
            }
            let n = samples.len() as f64;
            Some(SpectralCurve::new(grid, acc.into_iter().map(|a| a / n).collect())?)
        }
    };

    // Rows are samples (optionally centered); the right singular vectors are
    // the principal directions.
    let mut data = DMatrix::zeros(samples.len(), n_lambda);
    for (i, s) in samples.iter().enumerate() {
        for (j, &v) in s.values.iter().enumerate() {
            let m = mean_curve.as_ref().map_or(0.0, |c| c.values[j]);
            data[(i, j)] = v - m;
        }
    }

    let svd = data.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Optimization("SVD failed to produce singular vectors".to_string()))?;

    let mut basis = DMatrix::zeros(n_lambda, n_basis);
    let mut explained = Vec::with_capacity(n_basis);
    let n = samples.len() as f64;
    for k in 0..n_basis {
        let sigma = if k < svd.singular_values.len() { svd.singular_values[k] } else { 0.0 };
        explained.push(sigma * sigma / n);
        // Fix an overall sign so the fit is deterministic: make the largest
        // magnitude entry positive.
        let row = v_t.row(k);
        let (_, &pivot) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, v)| (i, v))
            .unwrap();
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n_lambda {
            basis[(j, k)] = sign * row[j];
        }
    }

    Ok(BasisModel { grid, basis, mean: mean_curve, explained_variance: explained })
}

/// Second-difference operator: interior row `i` holds `(1, −2, 1)` at columns
/// `(i−1, i, i+1)`; the two boundary rows are zero so the smoothness prior
/// treats the endpoints symmetrically.
pub fn second_derivative_matrix(grid: &WavelengthGrid) -> DMatrix<f64> {
    let n = grid.count;
    let mut d = DMatrix::zeros(n, n);
    for i in 1..n - 1 {
        d[(i, i - 1)] = 1.0;
        d[(i, i)] = -2.0;
        d[(i, i + 1)] = 1.0;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grid() -> WavelengthGrid {
        WavelengthGrid::new(400.0, 10.0, 31).unwrap()
    }

    #[test]
    fn rank_one_data_yields_the_generating_direction() {
        let g = grid();
        let c: Vec<f64> = g.wavelengths().map(|w| 0.2 + 0.5 * ((w - 400.0) / 300.0)).collect();
        let samples: Vec<_> = (1..=5)
            .map(|k| {
                SpectralCurve::new(g, c.iter().map(|v| v * k as f64 * 0.1).collect()).unwrap()
            })
            .collect();
        let model = fit_basis(&samples, 2, BasisMean::Zero).unwrap();

        // first column proportional to c (up to sign, here fixed positive)
        let norm = (c.iter().map(|v| v * v).sum::<f64>()).sqrt();
        for (j, &v) in c.iter().enumerate() {
            assert!((model.basis[(j, 0)] - v / norm).abs() < 1e-10);
        }
        assert!(model.explained_variance[1].abs() < 1e-18);
    }

    #[test]
    fn exact_two_dimensional_span_reconstructs_exactly() {
        let g = grid();
        let u: Vec<f64> = g.wavelengths().map(|w| (w / 80.0).sin().abs() + 0.1).collect();
        let v: Vec<f64> = g.wavelengths().map(|w| (w / 130.0).cos().abs() + 0.1).collect();
        let mut rng = StdRng::seed_from_u64(3);
        let samples: Vec<_> = (0..12)
            .map(|_| {
                let (a, b) = (rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0));
                SpectralCurve::new(
                    g,
                    u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect(),
                )
                .unwrap()
            })
            .collect();
        let model = fit_basis(&samples, 2, BasisMean::Zero).unwrap();
        for s in &samples {
            let alpha = model.project(s).unwrap();
            let back = model.reconstruct(&alpha).unwrap();
            for (a, b) in s.values.iter().zip(&back.values) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn explained_variance_matches_covariance_eigensolve() {
        // Oracle: eigendecomposition of the (uncentered) second-moment matrix,
        // a different algorithm from the SVD route the fit uses.
        let g = WavelengthGrid::default();
        let samples = crate::spectral::training_reflectances(&g);
        let model = fit_basis(&samples, 8, BasisMean::Zero).unwrap();

        let n = samples.len();
        let mut cov = DMatrix::zeros(g.count, g.count);
        for s in &samples {
            let v = DVector::from_column_slice(&s.values);
            cov += &v * v.transpose();
        }
        cov /= n as f64;
        let mut eig: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());

        for (k, ev) in model.explained_variance.iter().enumerate() {
            assert!(
                (ev - eig[k]).abs() < 1e-9 * eig[0].max(1.0),
                "component {k}: {ev} vs {}",
                eig[k]
            );
        }
    }

    #[test]
    fn columns_are_orthonormal() {
        let g = WavelengthGrid::default();
        let samples = crate::spectral::training_reflectances(&g);
        for mode in [BasisMean::Zero, BasisMean::Centered] {
            let model = fit_basis(&samples, 8, mode).unwrap();
            let gram = model.basis.transpose() * &model.basis;
            for i in 0..8 {
                for j in 0..8 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[(i, j)] - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn n_basis_out_of_range_is_an_argument_error() {
        let g = grid();
        let samples = vec![SpectralCurve::constant(g, 0.5); 4];
        assert!(fit_basis(&samples, 0, BasisMean::Zero).is_err());
        assert!(fit_basis(&samples, 5, BasisMean::Zero).is_err()); // > sample count
        assert!(fit_basis(&[], 1, BasisMean::Zero).is_err());
    }

    #[test]
    fn second_difference_annihilates_affine_curves() {
        let g = WavelengthGrid::new(410.0, 10.0, 27).unwrap();
        let d = second_derivative_matrix(&g);
        let affine = DVector::from_fn(27, |i, _| 3.0 * i as f64 + 0.7);
        let out = &d * affine;
        for v in out.iter() {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn second_difference_of_quadratic_is_two_on_interior_rows() {
        let g = WavelengthGrid::new(410.0, 10.0, 9).unwrap();
        let d = second_derivative_matrix(&g);
        let quad = DVector::from_fn(9, |i, _| (i * i) as f64);
        let out = &d * quad;
        assert_eq!(out[0], 0.0);
        assert_eq!(out[8], 0.0);
        for i in 1..8 {
            assert!((out[i] - 2.0).abs() < 1e-12);
        }
    }
}
