//! Pipeline configuration: every tunable constant under one roof, JSON
//! loadable with field-level defaults so partial files work.

use crate::error::Result;
use crate::spectral::WavelengthGrid;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Shared wavelength sampling for every spectral quantity.
    pub grid: WavelengthGrid,
    /// Number of reflectance basis functions.
    pub n_basis: usize,
    /// Mean-center the training curves before PCA.
    pub basis_mean_centered: bool,
    /// Spectral smoothness weight for intensities in [0, 1].
    pub gamma: f64,
    /// Bundle-adjustment weight on projector observations.
    pub w_p: f64,
    /// Cross-projector feature merge radius, pixels.
    pub merge_threshold_px: f64,
    /// Decode contrast floor, fraction of full scale.
    pub contrast_floor: f32,
    /// Feature support cap, pixels per code.
    pub support_cap: usize,
    /// Neighborhood size for normal estimation.
    pub normal_k: usize,
    /// Reprojection gate for accepting a triangulated track, pixels.
    pub reprojection_gate_px: f64,
    /// RANSAC inlier threshold, pixels.
    pub ransac_threshold_px: f64,
    pub ransac_iterations: usize,
    /// Huber loss scale in pixels for the bundle adjustment; `None` keeps the
    /// plain squared error.
    pub huber_px: Option<f64>,
    /// Refine one focal length per device class during bundle adjustment.
    pub refine_intrinsics: bool,
    /// Shadow-ray offset as a fraction of the scene bounding-box diagonal.
    pub visibility_eps_scale: f64,
    /// Intensities at or above this are treated as saturated and dropped.
    pub saturation_threshold: f64,
    /// Pairs with a smaller shading factor contribute no usable signal.
    pub min_shading: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            grid: WavelengthGrid::default(),
            n_basis: 8,
            basis_mean_centered: false,
            gamma: 0.06,
            w_p: 100.0,
            merge_threshold_px: 0.5,
            contrast_floor: 0.05,
            support_cap: 64,
            normal_k: 16,
            reprojection_gate_px: 2.0,
            ransac_threshold_px: 1.0,
            ransac_iterations: 2000,
            huber_px: None,
            refine_intrinsics: true,
            visibility_eps_scale: 1e-4,
            saturation_threshold: 0.995,
            min_shading: 1e-6,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write_json_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
