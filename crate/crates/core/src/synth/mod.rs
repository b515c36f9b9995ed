//! Ground-truth scene construction and forward rendering of the capture
//! protocol; the oracle behind every end-to-end test.

mod exact;
mod io;
mod perturb;
mod presets;
mod render;

pub use exact::{
    chart_patch_observations, exact_capture, exact_point_observations, ExactCapture, ExactOptions,
    GroundTruthPoint,
};
pub use io::{read_capture, write_capture, CaptureManifest, LoadedCapture, ManifestView};
pub use perturb::{perturb_images, perturb_poses};
pub use presets::{build_scene, chart_layout, SceneOverrides};
pub use render::{gaussian_field_noise, render_capture, CorrespondenceMap, GtSample, PairImages, RenderedCapture};

use crate::geom::{DeviceView, TriangleMesh, ViewId};
use crate::graycode::GrayCodeSpec;
use crate::spectral::{IlluminationSet, SensitivityMatrix, SpectralCurve, WavelengthGrid};
use serde::{Deserialize, Serialize};

/// One capture session: which projector was emitting, which camera recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapturePair {
    pub projector: ViewId,
    pub camera: ViewId,
}

/// Which device moved to produce a capture session, mirroring the alternating
/// acquisition walk around the object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionStep {
    Start,
    CameraMoved,
    ProjectorMoved,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Gaussian σ on linear intensities, fraction of full scale.
    pub sigma: f64,
    pub seed: u64,
}

/// How surface reflectance varies over the mesh.
#[derive(Debug, Clone)]
pub enum ReflectanceField {
    /// One curve everywhere.
    Uniform(SpectralCurve),
    /// Barycentric blend of per-vertex curves (smooth fields).
    PerVertex(Vec<SpectralCurve>),
    /// Chart layout: position on the z=0 plane picks a patch curve; the
    /// last curve is the surround.
    Chart { patches: Vec<SpectralCurve>, layout: ChartLayout, surround: SpectralCurve },
}

/// 4×6 patch grid on the z=0 plane, row-major from `origin`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChartLayout {
    pub origin: (f64, f64),
    pub patch_size: f64,
    pub gutter: f64,
    pub rows: usize,
    pub cols: usize,
}

impl ChartLayout {
    pub fn patch_at(&self, x: f64, y: f64) -> Option<usize> {
        let pitch = self.patch_size + self.gutter;
        let fx = (x - self.origin.0) / pitch;
        let fy = (y - self.origin.1) / pitch;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (col, row) = (fx.floor() as usize, fy.floor() as usize);
        if col >= self.cols || row >= self.rows {
            return None;
        }
        // inside the patch area of the cell, not the gutter
        if (fx - col as f64) * pitch <= self.patch_size && (fy - row as f64) * pitch <= self.patch_size {
            Some(row * self.cols + col)
        } else {
            None
        }
    }

    /// Center of a patch in plane coordinates.
    pub fn patch_center(&self, index: usize) -> (f64, f64) {
        let (row, col) = (index / self.cols, index % self.cols);
        let pitch = self.patch_size + self.gutter;
        (
            self.origin.0 + col as f64 * pitch + self.patch_size / 2.0,
            self.origin.1 + row as f64 * pitch + self.patch_size / 2.0,
        )
    }
}

/// Everything the forward renderer needs: geometry, materials, devices,
/// trajectory, spectra, and the noise model.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub name: String,
    pub mesh: TriangleMesh,
    pub reflectance: ReflectanceField,
    pub views: Vec<DeviceView>,
    pub pairs: Vec<CapturePair>,
    pub motions: Vec<MotionStep>,
    pub graycode: GrayCodeSpec,
    pub illuminations: IlluminationSet,
    pub sensitivity: SensitivityMatrix,
    pub grid: WavelengthGrid,
    pub noise: NoiseSpec,
}

impl SyntheticScene {
    /// Reflectance curve at a surface location.
    pub fn reflectance_at(&self, triangle: usize, bary: [f64; 3]) -> SpectralCurve {
        match &self.reflectance {
            ReflectanceField::Uniform(c) => c.clone(),
            ReflectanceField::PerVertex(curves) => {
                let idx = self.mesh.triangles[triangle];
                let mut values = vec![0.0; self.grid.count];
                for (w, vi) in bary.iter().zip(idx) {
                    for (acc, v) in values.iter_mut().zip(&curves[vi].values) {
                        *acc += w * v;
                    }
                }
                SpectralCurve { grid: self.grid, values }
            }
            ReflectanceField::Chart { patches, layout, surround } => {
                let t = self.mesh.triangles[triangle];
                let p = self.mesh.vertices[t[0]].coords * bary[0]
                    + self.mesh.vertices[t[1]].coords * bary[1]
                    + self.mesh.vertices[t[2]].coords * bary[2];
                match layout.patch_at(p.x, p.y) {
                    Some(i) => patches[i].clone(),
                    None => surround.clone(),
                }
            }
        }
    }

    pub fn projector_views(&self) -> Vec<&DeviceView> {
        self.views.iter().filter(|v| v.kind == crate::geom::DeviceKind::Projector).collect()
    }

    pub fn camera_views(&self) -> Vec<&DeviceView> {
        self.views.iter().filter(|v| v.kind == crate::geom::DeviceKind::Camera).collect()
    }
}
