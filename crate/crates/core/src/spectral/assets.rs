//! Bundled measurement data: CIE color matching functions, a camera
//! sensitivity set, projector primaries, a reflectance training library, and
//! a 24-patch color chart. All stored at 400–700 nm / 10 nm and resampled to
//! the session grid on load.

use super::{IlluminationSet, SensitivityMatrix, SpectralCurve, WavelengthGrid};

const CIE_CSV: &str = include_str!("../../assets/cie1931_2deg_10nm.csv");
const CAMERA_CSV: &str = include_str!("../../assets/camera_rgb.csv");
const PRIMARIES_CSV: &str = include_str!("../../assets/projector_primaries.csv");
const TRAINING_CSV: &str = include_str!("../../assets/reflectance_training.csv");
const CHART_CSV: &str = include_str!("../../assets/colorchart24.csv");

/// Index of the saturated red patch in the bundled chart.
pub const CHART_RED_PATCH: usize = 14;
/// Index of the white patch in the bundled chart.
pub const CHART_WHITE_PATCH: usize = 18;

fn parse_columns(csv: &str) -> (WavelengthGrid, Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().expect("bundled csv has a header");
    let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    let mut wavelengths = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for line in lines {
        let mut fields = line.split(',');
        let w: f64 = fields.next().unwrap().trim().parse().expect("wavelength");
        wavelengths.push(w);
        for col in columns.iter_mut() {
            let v: f64 = fields.next().expect("column count").trim().parse().expect("value");
            col.push(v);
        }
    }
    let step = wavelengths[1] - wavelengths[0];
    let grid = WavelengthGrid::new(wavelengths[0], step, wavelengths.len())
        .expect("bundled grid is valid");
    (grid, names, columns)
}

fn column_curve(csv: &str, index: usize, target: &WavelengthGrid) -> SpectralCurve {
    let (grid, _, columns) = parse_columns(csv);
    SpectralCurve::new(grid, columns[index].clone()).unwrap().resample(target)
}

/// CIE 1931 2° color matching functions `(x̄, ȳ, z̄)` on the given grid.
pub fn cie_xyz_cmf(grid: &WavelengthGrid) -> [SpectralCurve; 3] {
    [
        column_curve(CIE_CSV, 0, grid),
        column_curve(CIE_CSV, 1, grid),
        column_curve(CIE_CSV, 2, grid),
    ]
}

/// The bundled RGB camera sensitivity.
pub fn default_sensitivity(grid: &WavelengthGrid) -> SensitivityMatrix {
    SensitivityMatrix::new([
        column_curve(CAMERA_CSV, 0, grid),
        column_curve(CAMERA_CSV, 1, grid),
        column_curve(CAMERA_CSV, 2, grid),
    ])
    .unwrap()
}

/// The projector's RGB primary spectra.
pub fn default_primaries(grid: &WavelengthGrid) -> [SpectralCurve; 3] {
    [
        column_curve(PRIMARIES_CSV, 0, grid),
        column_curve(PRIMARIES_CSV, 1, grid),
        column_curve(PRIMARIES_CSV, 2, grid),
    ]
}

/// The seven default capture illuminations (r, g, b, c, m, y, w).
pub fn default_illuminations(grid: &WavelengthGrid) -> IlluminationSet {
    let [r, g, b] = default_primaries(grid);
    IlluminationSet::from_primaries(&r, &g, &b).unwrap()
}

/// Smooth reflectance library used to fit the PCA basis.
pub fn training_reflectances(grid: &WavelengthGrid) -> Vec<SpectralCurve> {
    let (src_grid, _, columns) = parse_columns(TRAINING_CSV);
    columns
        .into_iter()
        .map(|col| SpectralCurve::new(src_grid, col).unwrap().resample(grid))
        .collect()
}

/// All 24 chart patch reflectances, in chart order.
pub fn chart_reflectances(grid: &WavelengthGrid) -> Vec<SpectralCurve> {
    let (src_grid, _, columns) = parse_columns(CHART_CSV);
    columns
        .into_iter()
        .map(|col| SpectralCurve::new(src_grid, col).unwrap().resample(grid))
        .collect()
}

/// Names of the chart patches, row-major in the 4×6 layout.
pub fn chart_patch_names() -> Vec<String> {
    let (_, names, _) = parse_columns(CHART_CSV);
    names
}

/// One chart patch by index.
pub fn chart_patch(grid: &WavelengthGrid, index: usize) -> SpectralCurve {
    chart_reflectances(grid).swap_remove(index)
}
