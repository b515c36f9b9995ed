//! Forward intensity model: what the camera reads for a surface point of known
//! reflectance under each projected illumination.

use super::{BasisModel, IlluminationSet, SensitivityMatrix, SpectralCurve};
use crate::error::{Error, Result};
use nalgebra::DVector;

/// Multispectral intensity vector for one projector-camera pair.
///
/// Entry `3·n + m` is the discretized integral of
/// `sensitivity_m · illuminant_n · reflectance`, scaled by the geometric
/// shading factor. Linear in both the reflectance and the shading.
pub fn render_intensity(
    reflectance: &SpectralCurve,
    illum: &IlluminationSet,
    sens: &SensitivityMatrix,
    shading: f64,
) -> Result<Vec<f64>> {
    if reflectance.grid != illum.grid || reflectance.grid != sens.grid {
        return Err(Error::config("reflectance, illuminants and sensitivity must share one grid".to_string()));
    }
    if shading < 0.0 {
        return Err(Error::argument(format!("shading factor must be >= 0, got {shading}")));
    }
    let n = reflectance.grid.count;
    let mut out = Vec::with_capacity(3 * illum.len());
    for l in &illum.illuminants {
        for c in &sens.rows {
            let mut acc = 0.0;
            for i in 0..n {
                acc += c.values[i] * l.values[i] * reflectance.values[i];
            }
            out.push(shading * acc);
        }
    }
    Ok(out)
}

/// Same as [`render_intensity`] with the reflectance expressed in the basis:
/// the forward model the per-point solver inverts.
pub fn render_from_coefficients(
    alpha: &DVector<f64>,
    basis: &BasisModel,
    illum: &IlluminationSet,
    sens: &SensitivityMatrix,
    shading: f64,
) -> Result<Vec<f64>> {
    let reflectance = basis.reconstruct(alpha)?;
    render_intensity(&reflectance, illum, sens, shading)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{fit_basis, BasisMean, WavelengthGrid};
    use nalgebra::DVector;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn toy_grid() -> WavelengthGrid {
        WavelengthGrid::new(450.0, 100.0, 3).unwrap()
    }

    /// Identity sensitivity: channel m responds only at sample m.
    fn identity_sensitivity(grid: WavelengthGrid) -> SensitivityMatrix {
        let mut rows = Vec::new();
        for m in 0..3 {
            let mut v = vec![0.0; grid.count];
            v[m] = 1.0;
            rows.push(SpectralCurve::new(grid, v).unwrap());
        }
        SensitivityMatrix::new([rows[0].clone(), rows[1].clone(), rows[2].clone()]).unwrap()
    }

    #[test]
    fn identity_devices_reduce_to_shaded_reflectance() {
        let grid = toy_grid();
        let sens = identity_sensitivity(grid);
        let flat = SpectralCurve::constant(grid, 1.0);
        let illum = IlluminationSet::new(vec![flat.clone(), flat.clone()]).unwrap();
        let r = SpectralCurve::constant(grid, 0.5);
        let y = render_intensity(&r, &illum, &sens, 2.0).unwrap();
        assert_eq!(y.len(), 6);
        for v in y {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_reflectance_renders_zero() {
        let grid = toy_grid();
        let sens = identity_sensitivity(grid);
        let illum = IlluminationSet::new(vec![SpectralCurve::constant(grid, 0.7)]).unwrap();
        let r = SpectralCurve::constant(grid, 0.0);
        let y = render_intensity(&r, &illum, &sens, 1.3).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_double_loop_sum_on_default_assets() {
        // Independent route: evaluate the per-band integral with explicit loops
        // over illuminants, channels, and wavelengths.
        let grid = WavelengthGrid::default();
        let sens = crate::spectral::default_sensitivity(&grid);
        let illum = crate::spectral::default_illuminations(&grid);
        let r = crate::spectral::chart_patch(&grid, 14); // the red patch
        let shading = 0.37;
        let y = render_intensity(&r, &illum, &sens, shading).unwrap();

        let mut expected = Vec::new();
        for l in &illum.illuminants {
            for c in &sens.rows {
                let mut acc = 0.0;
                for i in 0..grid.count {
                    acc += c.values[i] * l.values[i] * r.values[i];
                }
                expected.push(shading * acc);
            }
        }
        assert_eq!(y.len(), expected.len());
        for (a, b) in y.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn grid_mismatch_is_a_config_error() {
        let grid = toy_grid();
        let other = WavelengthGrid::new(400.0, 50.0, 3).unwrap();
        let sens = identity_sensitivity(grid);
        let illum = IlluminationSet::new(vec![SpectralCurve::constant(grid, 1.0)]).unwrap();
        let r = SpectralCurve::constant(other, 0.5);
        assert!(render_intensity(&r, &illum, &sens, 1.0).is_err());
    }

    #[test]
    fn coefficient_rendering_composes_with_reconstruction() {
        let grid = WavelengthGrid::default();
        let sens = crate::spectral::default_sensitivity(&grid);
        let illum = crate::spectral::default_illuminations(&grid);
        let samples = crate::spectral::training_reflectances(&grid);
        let basis = fit_basis(&samples, 8, BasisMean::Zero).unwrap();

        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let alpha = DVector::from_fn(8, |_, _| rng.gen_range(-0.5..0.5));
            let direct = render_from_coefficients(&alpha, &basis, &illum, &sens, 0.8).unwrap();
            let r = basis.reconstruct(&alpha).unwrap();
            let composed = render_intensity(&r, &illum, &sens, 0.8).unwrap();
            for (a, b) in direct.iter().zip(&composed) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_coefficients_render_zero() {
        let grid = WavelengthGrid::default();
        let sens = crate::spectral::default_sensitivity(&grid);
        let illum = crate::spectral::default_illuminations(&grid);
        let samples = crate::spectral::training_reflectances(&grid);
        let basis = fit_basis(&samples, 4, BasisMean::Zero).unwrap();
        let y =
            render_from_coefficients(&DVector::zeros(4), &basis, &illum, &sens, 1.0).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn basis_column_renders_like_unit_coefficient() {
        let grid = WavelengthGrid::default();
        let sens = crate::spectral::default_sensitivity(&grid);
        let illum = crate::spectral::default_illuminations(&grid);
        let samples = crate::spectral::training_reflectances(&grid);
        let basis = fit_basis(&samples, 5, BasisMean::Zero).unwrap();

        let mut e1 = DVector::zeros(5);
        e1[0] = 1.0;
        let y = render_from_coefficients(&e1, &basis, &illum, &sens, 1.0).unwrap();
        let col = SpectralCurve::new(grid, basis.basis.column(0).iter().copied().collect()).unwrap();
        let expected = render_intensity(&col, &illum, &sens, 1.0).unwrap();
        for (a, b) in y.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
