//! Capture directory layout:
//!
//! ```text
//! capture/
//!   manifest.json              devices, pairs, spectra, pattern spec, files
//!   pair_00/pat_000.pgm ...    16-bit pattern stack
//!   pair_00/color_0.pfm ...    linear RGB color frames
//!   ground_truth/views.json    true poses (evaluation only)
//!   ground_truth/mesh.ply      occluder mesh for visibility
//!   ground_truth/corr_00.pfm   (proj_u, proj_v, shading) per camera pixel
//! ```
//!
//! The reconstruction pipeline reads the manifest and images only; the
//! ground_truth directory exists for evaluation and for visibility's occluder
//! mesh, which stands in for a reconstructed surface.

use super::{CapturePair, RenderedCapture, SyntheticScene};
use crate::error::{Error, Result};
use crate::geom::{DeviceKind, DeviceView, Intrinsics, Pose, TriangleMesh, ViewId};
use crate::graycode::GrayCodeSpec;
use crate::img::{read_pfm_rgb, read_pgm, write_pfm_rgb, write_pgm16, GrayImage, RgbImage};
use crate::spectral::{IlluminationSet, SensitivityMatrix, SpectralCurve, WavelengthGrid};
use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestView {
    pub id: usize,
    pub kind: DeviceKind,
    pub width: usize,
    pub height: usize,
    /// Nominal focal guess handed to self-calibration (think EXIF).
    pub nominal_focal: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestPair {
    pub projector: usize,
    pub camera: usize,
    pub dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptureManifest {
    pub name: String,
    pub grid: WavelengthGrid,
    pub graycode: GrayCodeSpec,
    pub views: Vec<ManifestView>,
    pub pairs: Vec<ManifestPair>,
    /// Illuminant spectra on `grid`, capture order.
    pub illuminants: Vec<Vec<f64>>,
    /// RGB sensitivity rows on `grid`.
    pub sensitivity: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct GtView {
    id: usize,
    kind: DeviceKind,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    rotation: [f64; 4],
    translation: [f64; 3],
}

pub fn write_capture(dir: &Path, scene: &SyntheticScene, capture: &RenderedCapture) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = CaptureManifest {
        name: scene.name.clone(),
        grid: scene.grid,
        graycode: scene.graycode,
        views: scene
            .views
            .iter()
            .map(|v| ManifestView {
                id: v.id.0,
                kind: v.kind,
                width: v.intrinsics.width,
                height: v.intrinsics.height,
                nominal_focal: 0.5 * (v.intrinsics.fx + v.intrinsics.fy),
            })
            .collect(),
        pairs: scene
            .pairs
            .iter()
            .enumerate()
            .map(|(i, p)| ManifestPair {
                projector: p.projector.0,
                camera: p.camera.0,
                dir: format!("pair_{i:02}"),
            })
            .collect(),
        illuminants: scene.illuminations.illuminants.iter().map(|c| c.values.clone()).collect(),
        sensitivity: scene.sensitivity.rows.iter().map(|c| c.values.clone()).collect(),
        noise_sigma: scene.noise.sigma,
        seed: scene.noise.seed,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

    for (i, pair) in capture.pairs.iter().enumerate() {
        let pair_dir = dir.join(format!("pair_{i:02}"));
        std::fs::create_dir_all(&pair_dir)?;
        for (f, img) in pair.patterns.iter().enumerate() {
            write_pgm16(&pair_dir.join(format!("pat_{f:03}.pgm")), img)?;
        }
        for (n, img) in pair.colors.iter().enumerate() {
            write_pfm_rgb(&pair_dir.join(format!("color_{n}.pfm")), img)?;
        }
    }

    // ground truth sidecar
    let gt_dir = dir.join("ground_truth");
    std::fs::create_dir_all(&gt_dir)?;
    let gt_views: Vec<GtView> = scene
        .views
        .iter()
        .map(|v| {
            let q = v.pose.quaternion();
            GtView {
                id: v.id.0,
                kind: v.kind,
                fx: v.intrinsics.fx,
                fy: v.intrinsics.fy,
                cx: v.intrinsics.cx,
                cy: v.intrinsics.cy,
                width: v.intrinsics.width,
                height: v.intrinsics.height,
                rotation: [q.w, q.i, q.j, q.k],
                translation: v.pose.translation.into(),
            }
        })
        .collect();
    std::fs::write(gt_dir.join("views.json"), serde_json::to_string_pretty(&gt_views)?)?;
    crate::ply::write_mesh(&gt_dir.join("mesh.ply"), &scene.mesh, false)?;
    for (i, corr) in capture.correspondence.iter().enumerate() {
        let mut img = RgbImage::new(corr.width, corr.height);
        for y in 0..corr.height {
            for x in 0..corr.width {
                let px = match corr.at(x, y) {
                    Some(s) => [s.proj_uv.0 as f32, s.proj_uv.1 as f32, s.shading as f32],
                    None => [-1.0, -1.0, 0.0],
                };
                img.set(x, y, px);
            }
        }
        write_pfm_rgb(&gt_dir.join(format!("corr_{i:02}.pfm")), &img)?;
    }
    Ok(())
}

/// A capture as the pipeline sees it: manifest plus loaded images. Poses are
/// not part of this; they are the pipeline's job.
#[derive(Debug)]
pub struct LoadedCapture {
    pub dir: PathBuf,
    pub manifest: CaptureManifest,
    /// Per pair: the pattern stack.
    pub patterns: Vec<Vec<GrayImage>>,
    /// Per pair: the color frames.
    pub colors: Vec<Vec<RgbImage>>,
}

impl LoadedCapture {
    pub fn illuminations(&self) -> Result<IlluminationSet> {
        IlluminationSet::new(
            self.manifest
                .illuminants
                .iter()
                .map(|v| SpectralCurve::new(self.manifest.grid, v.clone()))
                .collect::<Result<_>>()?,
        )
    }

    pub fn sensitivity(&self) -> Result<SensitivityMatrix> {
        let rows: Vec<SpectralCurve> = self
            .manifest
            .sensitivity
            .iter()
            .map(|v| SpectralCurve::new(self.manifest.grid, v.clone()))
            .collect::<Result<_>>()?;
        if rows.len() != 3 {
            return Err(Error::config("sensitivity must have exactly 3 rows".to_string()));
        }
        SensitivityMatrix::new([rows[0].clone(), rows[1].clone(), rows[2].clone()])
    }

    pub fn pair_ids(&self) -> Vec<CapturePair> {
        self.manifest
            .pairs
            .iter()
            .map(|p| CapturePair { projector: ViewId(p.projector), camera: ViewId(p.camera) })
            .collect()
    }

    /// Unregistered view seeds for the reconstruction pipeline, poses unknown.
    pub fn view_seeds(&self) -> Result<Vec<crate::sfm::ViewSeed>> {
        self.manifest
            .views
            .iter()
            .map(|v| {
                Ok(crate::sfm::ViewSeed {
                    id: ViewId(v.id),
                    kind: v.kind,
                    intrinsics: Intrinsics::centered(v.nominal_focal, v.width, v.height)?,
                })
            })
            .collect()
    }

    /// Ground-truth device views from the sidecar (evaluation only).
    pub fn ground_truth_views(&self) -> Result<Vec<DeviceView>> {
        let text = std::fs::read_to_string(self.dir.join("ground_truth/views.json"))?;
        let gt: Vec<GtView> = serde_json::from_str(&text)?;
        gt.into_iter()
            .map(|v| {
                let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                    v.rotation[0],
                    v.rotation[1],
                    v.rotation[2],
                    v.rotation[3],
                ));
                Ok(DeviceView {
                    id: ViewId(v.id),
                    kind: v.kind,
                    intrinsics: Intrinsics::new(v.fx, v.fy, v.cx, v.cy, v.width, v.height)?,
                    pose: Pose::from_parts(
                        Rotation3::from(q),
                        Vector3::new(v.translation[0], v.translation[1], v.translation[2]),
                    ),
                })
            })
            .collect()
    }

    pub fn ground_truth_mesh(&self) -> Result<TriangleMesh> {
        crate::ply::read_mesh(&self.dir.join("ground_truth/mesh.ply"))
    }
}

pub fn read_capture(dir: &Path) -> Result<LoadedCapture> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: CaptureManifest = serde_json::from_str(&text)?;
    let mut patterns = Vec::new();
    let mut colors = Vec::new();
    for pair in &manifest.pairs {
        let pair_dir = dir.join(&pair.dir);
        let stack: Vec<GrayImage> = (0..manifest.graycode.pattern_count())
            .map(|f| read_pgm(&pair_dir.join(format!("pat_{f:03}.pgm"))))
            .collect::<Result<_>>()?;
        let frames: Vec<RgbImage> = (0..manifest.illuminants.len())
            .map(|n| read_pfm_rgb(&pair_dir.join(format!("color_{n}.pfm"))))
            .collect::<Result<_>>()?;
        patterns.push(stack);
        colors.push(frames);
    }
    Ok(LoadedCapture { dir: dir.to_path_buf(), manifest, patterns, colors })
}
