//! Wavelength-sampled quantities and the multispectral image-formation model.
//!
//! Everything here lives on one shared [`WavelengthGrid`]. A capture under
//! `N_l` uniform color illuminations observed by a 3-channel camera yields a
//! `3·N_l` intensity vector per surface point, ordered illuminant-major
//! (all three channels of illuminant 0, then illuminant 1, ...).

mod assets;
mod basis;
mod io;
mod render;
mod srgb;

pub use assets::*;
pub use basis::{fit_basis, second_derivative_matrix, BasisMean, BasisModel};
pub use io::{read_basis_csv, read_curve_csv, write_basis_csv, write_curve_csv};
pub use render::{render_from_coefficients, render_intensity};
pub use srgb::reflectance_to_srgb;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform wavelength sampling: `count` samples starting at `start_nm`,
/// spaced `step_nm` apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthGrid {
    pub start_nm: f64,
    pub step_nm: f64,
    pub count: usize,
}

impl WavelengthGrid {
    pub fn new(start_nm: f64, step_nm: f64, count: usize) -> Result<Self> {
        if !(step_nm > 0.0) {
            return Err(Error::argument(format!("step_nm must be > 0, got {step_nm}")));
        }
        if count < 3 {
            return Err(Error::argument(format!(
                "grid needs at least 3 samples for a second-difference stencil, got {count}"
            )));
        }
        Ok(Self { start_nm, step_nm, count })
    }

    pub fn wavelength(&self, i: usize) -> f64 {
        self.start_nm + self.step_nm * i as f64
    }

    pub fn end_nm(&self) -> f64 {
        self.wavelength(self.count - 1)
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.wavelength(i))
    }
}

impl Default for WavelengthGrid {
    /// 410–670 nm at 10 nm steps (27 samples), the range the projector
    /// illuminations actually carry power in.
    fn default() -> Self {
        Self { start_nm: 410.0, step_nm: 10.0, count: 27 }
    }
}

/// A sampled function of wavelength: reflectance, illuminant power,
/// or one sensitivity channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    pub grid: WavelengthGrid,
    pub values: Vec<f64>,
}

impl SpectralCurve {
    /// Length must match the grid; values must be finite. Nonnegativity is a
    /// property of *measured* curves and is checked where those are built
    /// (estimated reflectances may dip below zero and are clipped only for
    /// display).
    pub fn new(grid: WavelengthGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::config(format!(
                "curve has {} samples but grid expects {}",
                values.len(),
                grid.count
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("curve contains non-finite values".to_string()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: WavelengthGrid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.count] }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Linear interpolation onto another grid. Wavelengths outside the source
    /// range clamp to the endpoint samples.
    pub fn resample(&self, target: &WavelengthGrid) -> SpectralCurve {
        let values = target
            .wavelengths()
            .map(|w| {
                let t = (w - self.grid.start_nm) / self.grid.step_nm;
                if t <= 0.0 {
                    self.values[0]
                } else if t >= (self.grid.count - 1) as f64 {
                    self.values[self.grid.count - 1]
                } else {
                    let i = t.floor() as usize;
                    let f = t - i as f64;
                    self.values[i] * (1.0 - f) + self.values[i + 1] * f
                }
            })
            .collect();
        SpectralCurve { grid: *target, values }
    }

    pub fn scaled(&self, factor: f64) -> SpectralCurve {
        SpectralCurve {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// RGB camera sensitivity, one curve per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMatrix {
    pub grid: WavelengthGrid,
    /// R, G, B in that order.
    pub rows: [SpectralCurve; 3],
}

impl SensitivityMatrix {
    pub fn new(rows: [SpectralCurve; 3]) -> Result<Self> {
        let grid = rows[0].grid;
        for (i, row) in rows.iter().enumerate() {
            if row.grid != grid {
                return Err(Error::config("sensitivity channels on different grids".to_string()));
            }
            if !row.is_nonnegative() {
                return Err(Error::argument(format!("sensitivity channel {i} has negative samples")));
            }
        }
        Ok(Self { grid, rows })
    }

    pub fn resample(&self, target: &WavelengthGrid) -> SensitivityMatrix {
        SensitivityMatrix {
            grid: *target,
            rows: [
                self.rows[0].resample(target),
                self.rows[1].resample(target),
                self.rows[2].resample(target),
            ],
        }
    }
}

/// The ordered set of uniform color illuminations projected during capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationSet {
    pub grid: WavelengthGrid,
    pub illuminants: Vec<SpectralCurve>,
}

impl IlluminationSet {
    pub fn new(illuminants: Vec<SpectralCurve>) -> Result<Self> {
        let first = illuminants
            .first()
            .ok_or_else(|| Error::argument("illumination set is empty".to_string()))?;
        let grid = first.grid;
        for (i, l) in illuminants.iter().enumerate() {
            if l.grid != grid {
                return Err(Error::config("illuminants on different grids".to_string()));
            }
            if !l.is_nonnegative() {
                return Err(Error::argument(format!("illuminant {i} has negative samples")));
            }
        }
        Ok(Self { grid, illuminants })
    }

    /// The seven capture illuminations built from the projector's RGB primaries
    /// by binary combination: red, green, blue, cyan, magenta, yellow, white.
    pub fn from_primaries(
        red: &SpectralCurve,
        green: &SpectralCurve,
        blue: &SpectralCurve,
    ) -> Result<Self> {
        if red.grid != green.grid || red.grid != blue.grid {
            return Err(Error::config("primaries on different grids".to_string()));
        }
        let grid = red.grid;
        let combo = |use_r: bool, use_g: bool, use_b: bool| {
            let values = (0..grid.count)
                .map(|i| {
                    let mut v = 0.0;
                    if use_r {
                        v += red.values[i];
                    }
                    if use_g {
                        v += green.values[i];
                    }
                    if use_b {
                        v += blue.values[i];
                    }
                    v
                })
                .collect();
            SpectralCurve { grid, values }
        };
        Self::new(vec![
            combo(true, false, false),
            combo(false, true, false),
            combo(false, false, true),
            combo(false, true, true),
            combo(true, false, true),
            combo(true, true, false),
            combo(true, true, true),
        ])
    }

    pub fn len(&self) -> usize {
        self.illuminants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.illuminants.is_empty()
    }

    /// Number of intensity bands a capture yields: 3 channels per illuminant.
    pub fn band_count(&self) -> usize {
        3 * self.illuminants.len()
    }
}

/// One RGB camera channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    R,
    G,
    B,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::R, Channel::G, Channel::B];

    pub fn index(self) -> usize {
        match self {
            Channel::R => 0,
            Channel::G => 1,
            Channel::B => 2,
        }
    }
}

/// One (illuminant, camera channel) measurement band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BandIndex {
    pub illuminant: usize,
    pub channel: Channel,
}

impl BandIndex {
    pub fn new(illuminant: usize, channel: Channel) -> Self {
        Self { illuminant, channel }
    }

    /// Position in the illuminant-major intensity vector.
    pub fn flat(&self) -> usize {
        self.illuminant * 3 + self.channel.index()
    }

    pub fn from_flat(flat: usize) -> Self {
        let channel = match flat % 3 {
            0 => Channel::R,
            1 => Channel::G,
            _ => Channel::B,
        };
        Self { illuminant: flat / 3, channel }
    }

    /// All `3·N_l` bands in flat order.
    pub fn full_set(n_illuminants: usize) -> Vec<BandIndex> {
        (0..3 * n_illuminants).map(Self::from_flat).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_matches_projector_power_range() {
        let g = WavelengthGrid::default();
        assert_eq!(g.start_nm, 410.0);
        assert_eq!(g.end_nm(), 670.0);
        assert_eq!(g.count, 27);
    }

    #[test]
    fn grid_rejects_too_few_samples() {
        assert!(WavelengthGrid::new(400.0, 10.0, 2).is_err());
        assert!(WavelengthGrid::new(400.0, 0.0, 31).is_err());
        assert!(WavelengthGrid::new(400.0, -1.0, 31).is_err());
    }

    #[test]
    fn curve_length_must_match_grid() {
        let g = WavelengthGrid::new(400.0, 10.0, 4).unwrap();
        assert!(SpectralCurve::new(g, vec![1.0; 3]).is_err());
        assert!(SpectralCurve::new(g, vec![1.0; 4]).is_ok());
    }

    #[test]
    fn resample_is_identity_on_same_grid() {
        let g = WavelengthGrid::new(400.0, 10.0, 31).unwrap();
        let c = SpectralCurve::new(g, (0..31).map(|i| (i as f64).sin().abs()).collect()).unwrap();
        let r = c.resample(&g);
        for (a, b) in c.values.iter().zip(&r.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn resample_interpolates_linearly() {
        let g = WavelengthGrid::new(400.0, 10.0, 31).unwrap();
        // ramp in wavelength stays a ramp on a shifted grid
        let c = SpectralCurve::new(g, g.wavelengths().map(|w| 0.001 * w).collect()).unwrap();
        let target = WavelengthGrid::new(415.0, 10.0, 20).unwrap();
        let r = c.resample(&target);
        for (i, v) in r.values.iter().enumerate() {
            assert!((v - 0.001 * target.wavelength(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn seven_illuminations_from_binary_primary_combinations() {
        let g = WavelengthGrid::new(400.0, 100.0, 3).unwrap();
        let r = SpectralCurve::new(g, vec![0.0, 0.0, 1.0]).unwrap();
        let gr = SpectralCurve::new(g, vec![0.0, 1.0, 0.0]).unwrap();
        let b = SpectralCurve::new(g, vec![1.0, 0.0, 0.0]).unwrap();
        let set = IlluminationSet::from_primaries(&r, &gr, &b).unwrap();
        assert_eq!(set.len(), 7);
        assert_eq!(set.illuminants[0].values, vec![0.0, 0.0, 1.0]); // red
        assert_eq!(set.illuminants[3].values, vec![1.0, 1.0, 0.0]); // cyan = g+b
        assert_eq!(set.illuminants[4].values, vec![1.0, 0.0, 1.0]); // magenta = r+b
        assert_eq!(set.illuminants[5].values, vec![0.0, 1.0, 1.0]); // yellow = r+g
        assert_eq!(set.illuminants[6].values, vec![1.0, 1.0, 1.0]); // white
    }

    #[test]
    fn band_index_round_trips_illuminant_major() {
        for flat in 0..21 {
            let b = BandIndex::from_flat(flat);
            assert_eq!(b.flat(), flat);
        }
        assert_eq!(BandIndex::new(2, Channel::G).flat(), 7);
        assert_eq!(BandIndex::full_set(7).len(), 21);
    }
}
