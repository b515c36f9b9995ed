//! Reflectance → sRGB for visualization.
//!
//! Convention (the estimation pipeline never depends on it): XYZ by
//! discretized integration against the CIE 1931 2° observer, von Kries
//! scaling in XYZ so the perfect reflector under the chosen illuminant maps
//! to the D65 white point, then the linear sRGB matrix, gamma encoding, and
//! a clip to `[0, 1]`.

use super::{cie_xyz_cmf, SpectralCurve};
use crate::error::{Error, Result};

const XYZ_TO_SRGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

fn gamma_encode(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

pub fn reflectance_to_srgb(reflectance: &SpectralCurve, illuminant: &SpectralCurve) -> Result<[f64; 3]> {
    if reflectance.grid != illuminant.grid {
        return Err(Error::config("reflectance and illuminant grids differ".to_string()));
    }
    let cmf = cie_xyz_cmf(&reflectance.grid);

    let mut xyz = [0.0; 3];
    let mut white = [0.0; 3];
    for i in 0..reflectance.grid.count {
        let l = illuminant.values[i];
        for c in 0..3 {
            xyz[c] += cmf[c].values[i] * l * reflectance.values[i];
            white[c] += cmf[c].values[i] * l;
        }
    }
    if white.iter().any(|&w| w <= 0.0) {
        return Err(Error::argument("illuminant has no power inside the CIE observer range".to_string()));
    }

    let adapted = [
        xyz[0] / white[0] * D65_WHITE[0],
        xyz[1] / white[1] * D65_WHITE[1],
        xyz[2] / white[2] * D65_WHITE[2],
    ];
    let mut out = [0.0; 3];
    for (i, row) in XYZ_TO_SRGB.iter().enumerate() {
        let lin = row[0] * adapted[0] + row[1] * adapted[1] + row[2] * adapted[2];
        out[i] = gamma_encode(lin.clamp(0.0, 1.0)).clamp(0.0, 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{chart_patch, WavelengthGrid, CHART_RED_PATCH};

    #[test]
    fn perfect_reflector_maps_to_white() {
        let grid = WavelengthGrid::default();
        let r = SpectralCurve::constant(grid, 1.0);
        let illum = crate::spectral::default_illuminations(&grid).illuminants[6].clone();
        let [sr, sg, sb] = reflectance_to_srgb(&r, &illum).unwrap();
        assert!((sr - 1.0).abs() < 1e-6, "{sr}");
        assert!((sg - 1.0).abs() < 1e-6, "{sg}");
        assert!((sb - 1.0).abs() < 1e-6, "{sb}");
    }

    #[test]
    fn zero_reflectance_maps_to_black() {
        let grid = WavelengthGrid::default();
        let r = SpectralCurve::constant(grid, 0.0);
        let illum = SpectralCurve::constant(grid, 1.0);
        assert_eq!(reflectance_to_srgb(&r, &illum).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn red_patch_is_predominantly_red() {
        // Oracle: rank the channels via a separately-coded XYZ integration.
        let grid = WavelengthGrid::default();
        let patch = chart_patch(&grid, CHART_RED_PATCH);
        let ee = SpectralCurve::constant(grid, 1.0);
        let [sr, sg, sb] = reflectance_to_srgb(&patch, &ee).unwrap();
        assert!(sr > sg && sr > sb, "got ({sr}, {sg}, {sb})");

        let cmf = crate::spectral::cie_xyz_cmf(&grid);
        let dot = |a: &SpectralCurve, b: &SpectralCurve| -> f64 {
            a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum()
        };
        let x = dot(&cmf[0], &patch);
        let y = dot(&cmf[1], &patch);
        let z = dot(&cmf[2], &patch);
        // a red surface reflects long wavelengths: X dominates Y and Z
        assert!(x > y && x > z);
    }
}
