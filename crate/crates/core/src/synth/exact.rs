//! Analytic (image-free) captures: exact sub-pixel feature positions and
//! exact per-point multispectral observations, straight from the scene
//! geometry. This is the zero-observation-noise path used to separate
//! algorithmic error from decode quantization.

use super::{gaussian_field_noise, SyntheticScene};
use crate::error::Result;
use crate::geom::{project, shading_factor, DeviceView, RayCaster, ViewId};
use crate::graycode::Feature;
use crate::sfm::DecodedView;
use crate::spectral::{render_intensity, SpectralCurve};
use nalgebra::{Point3, Unit, Vector3};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    /// Sample every `stride`-th projector pixel in both axes.
    pub stride: usize,
    /// Gaussian noise on camera feature positions (pixels); projector
    /// features stay exact.
    pub camera_sigma: f64,
    pub seed: u64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self { stride: 1, camera_sigma: 0.0, seed: 0 }
    }
}

/// Ground truth for one projector code: where its ray lands.
#[derive(Debug, Clone)]
pub struct GroundTruthPoint {
    pub projector: ViewId,
    pub code: (u32, u32),
    pub position: Point3<f64>,
    pub normal: Unit<Vector3<f64>>,
    pub reflectance: SpectralCurve,
}

#[derive(Debug, Clone)]
pub struct ExactCapture {
    /// One entry per capture pair, shaped exactly like decoded image features.
    pub decoded: Vec<DecodedView>,
    /// Ground truth per (projector, code).
    pub points: BTreeMap<(ViewId, (u32, u32)), GroundTruthPoint>,
}

/// Trace every sampled projector pixel to the mesh and project the hits into
/// the paired cameras with exact sub-pixel positions.
pub fn exact_capture(scene: &SyntheticScene, opts: &ExactOptions) -> Result<ExactCapture> {
    let caster = RayCaster::new(&scene.mesh);
    let eps = 1e-4 * scene.mesh.bbox_diagonal();
    let stride = opts.stride.max(1);

    // hits are per projector, shared by its capture pairs
    let mut points: BTreeMap<(ViewId, (u32, u32)), GroundTruthPoint> = BTreeMap::new();
    for proj in scene.projector_views() {
        let kp = &proj.intrinsics;
        for py in (0..kp.height).step_by(stride) {
            for px in (0..kp.width).step_by(stride) {
                let dir_dev = Vector3::new(
                    (px as f64 + 0.5 - kp.cx) / kp.fx,
                    (py as f64 + 0.5 - kp.cy) / kp.fy,
                    1.0,
                );
                let origin = proj.pose.center();
                let dir = proj.pose.rotation.inverse() * dir_dev;
                let Some(hit) = caster.intersect(&origin, &dir, 1e-9, f64::INFINITY) else {
                    continue;
                };
                let position = origin + dir * hit.t;
                let normal =
                    Unit::new_normalize(scene.mesh.shading_normal(hit.triangle, hit.barycentric));
                // lit check: front-facing to its own projector
                let s = shading_factor(&origin, &position, &normal).unwrap_or(0.0);
                if s <= 0.0 {
                    continue;
                }
                points.insert(
                    (proj.id, (px as u32, py as u32)),
                    GroundTruthPoint {
                        projector: proj.id,
                        code: (px as u32, py as u32),
                        position,
                        normal,
                        reflectance: scene.reflectance_at(hit.triangle, hit.barycentric),
                    },
                );
            }
        }
    }

    let mut decoded = Vec::new();
    for (pair_idx, pair) in scene.pairs.iter().enumerate() {
        let cam = &scene.views[pair.camera.0];
        let mut features = BTreeMap::new();
        for ((proj_id, code), gt) in &points {
            if *proj_id != pair.projector {
                continue;
            }
            let Some((u, v)) = visible_projection(gt, cam, &caster, eps) else { continue };
            let (mut u, mut v) = (u, v);
            if opts.camera_sigma > 0.0 {
                let stream = pair_idx as u64;
                let index = (code.0 as u64) << 32 | code.1 as u64;
                u += opts.camera_sigma * gaussian_field_noise(opts.seed, stream * 2, index);
                v += opts.camera_sigma * gaussian_field_noise(opts.seed, stream * 2 + 1, index);
            }
            features.insert(*code, Feature { position: (u, v), support: 1 });
        }
        decoded.push(DecodedView { camera: pair.camera, projector: pair.projector, features });
    }

    Ok(ExactCapture { decoded, points })
}

fn visible_projection(
    gt: &GroundTruthPoint,
    view: &DeviceView,
    caster: &RayCaster,
    eps: f64,
) -> Option<(f64, f64)> {
    let (u, v) = project(view, &gt.position).ok()?;
    let k = &view.intrinsics;
    if u < 0.0 || u >= k.width as f64 || v < 0.0 || v >= k.height as f64 {
        return None;
    }
    let origin = gt.position + gt.normal.as_ref() * eps;
    let dir = view.pose.center() - origin;
    if caster.occluded(&origin, &dir, 1e-9, 1.0 - 1e-9) {
        return None;
    }
    Some((u, v))
}

/// Exact multispectral observations of ground-truth points: for every capture
/// pair that sees a point (projector lit + camera unoccluded), the rendered
/// intensity vector and the true shading factor.
///
/// Per point: `Vec<(pair index, shading, y)>`.
pub fn exact_point_observations(
    scene: &SyntheticScene,
    points: &[GroundTruthPoint],
) -> Result<Vec<Vec<(usize, f64, Vec<f64>)>>> {
    let caster = RayCaster::new(&scene.mesh);
    let eps = 1e-4 * scene.mesh.bbox_diagonal();
    let mut out = Vec::with_capacity(points.len());
    for gt in points {
        let mut per_pair = Vec::new();
        for (pair_idx, pair) in scene.pairs.iter().enumerate() {
            let proj = &scene.views[pair.projector.0];
            let cam = &scene.views[pair.camera.0];
            // projector side: in bounds, unoccluded, front-facing
            if visible_projection(gt, proj, &caster, eps).is_none() {
                continue;
            }
            if visible_projection(gt, cam, &caster, eps).is_none() {
                continue;
            }
            let s = shading_factor(&proj.pose.center(), &gt.position, &gt.normal)?;
            if s <= 0.0 {
                continue;
            }
            let y = render_intensity(&gt.reflectance, &scene.illuminations, &scene.sensitivity, s)?;
            per_pair.push((pair_idx, s, y));
        }
        out.push(per_pair);
    }
    Ok(out)
}

/// Per-patch averaged multispectral observations of a rendered chart capture:
/// the measurement protocol samples each patch's interior at the projected
/// positions in every visible pair's color frames and averages (reflectance
/// is constant on a patch, so averaging intensities and shading together is
/// exact).
pub fn chart_patch_observations(
    views: &[DeviceView],
    pairs: &[super::CapturePair],
    mesh: &crate::geom::TriangleMesh,
    layout: &super::ChartLayout,
    colors: &[Vec<crate::img::RgbImage>],
    samples_per_side: usize,
) -> Result<Vec<Vec<crate::reflectance::PairObservation>>> {
    let caster = RayCaster::new(mesh);
    let eps = 1e-4 * mesh.bbox_diagonal();
    let n = samples_per_side.max(1);
    let up = Unit::new_normalize(Vector3::z());
    let n_patches = layout.rows * layout.cols;
    let n_bands = colors.first().map_or(0, |frames| frames.len() * 3);

    let mut out = Vec::with_capacity(n_patches);
    for patch in 0..n_patches {
        let (cx, cy) = layout.patch_center(patch);
        let mut per_pair = Vec::new();
        for (pair_idx, pair) in pairs.iter().enumerate() {
            let proj = &views[pair.projector.0];
            let cam = &views[pair.camera.0];
            let mut acc_y = vec![0.0; n_bands];
            let mut acc_s = 0.0;
            let mut used = 0;
            for iy in 0..n {
                for ix in 0..n {
                    let offset = |i: usize| {
                        if n == 1 {
                            0.0
                        } else {
                            (i as f64 / (n - 1) as f64 - 0.5) * layout.patch_size * 0.6
                        }
                    };
                    let gt = GroundTruthPoint {
                        projector: pair.projector,
                        code: (0, 0),
                        position: Point3::new(cx + offset(ix), cy + offset(iy), 0.0),
                        normal: up,
                        reflectance: crate::spectral::SpectralCurve::constant(
                            crate::spectral::WavelengthGrid::default(),
                            0.0,
                        ),
                    };
                    if visible_projection(&gt, proj, &caster, eps).is_none() {
                        continue;
                    }
                    let Some((u, v)) = visible_projection(&gt, cam, &caster, eps) else {
                        continue;
                    };
                    let s = shading_factor(&proj.pose.center(), &gt.position, &up)?;
                    if s <= 0.0 {
                        continue;
                    }
                    for (f, frame) in colors[pair_idx].iter().enumerate() {
                        let rgb = frame.sample_bilinear(u, v);
                        for m in 0..3 {
                            acc_y[f * 3 + m] += rgb[m];
                        }
                    }
                    acc_s += s;
                    used += 1;
                }
            }
            if used > 0 {
                let inv = 1.0 / used as f64;
                per_pair.push(crate::reflectance::PairObservation {
                    pair: pair_idx,
                    y: acc_y.into_iter().map(|v| v * inv).collect(),
                    shading: acc_s * inv,
                });
            }
        }
        out.push(per_pair);
    }
    Ok(out)
}
