//! Forward rendering of the capture protocol: per camera pixel, ray-cast the
//! mesh, map the hit into the active projector, apply the near-light
//! Lambertian shading with hard shadows, and emit the full pattern stack and
//! the seven color frames. Ground truth is recorded pre-noise.

use super::{CapturePair, ReflectanceField, SyntheticScene};
use crate::error::{Error, Result};
use crate::geom::{project, shading_factor, RayCaster};
use crate::img::{GrayImage, RgbImage};
use crate::spectral::render_intensity;
use nalgebra::{Point3, Unit, Vector3};
use rayon::prelude::*;

/// Ground truth for one camera pixel, recorded before noise.
#[derive(Debug, Clone, Copy)]
pub struct GtSample {
    /// Projector pixel whose footprint covers the hit.
    pub proj_px: (u32, u32),
    /// Exact sub-pixel projector coordinates of the hit.
    pub proj_uv: (f64, f64),
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
    /// Shading factor; 0 when shadowed or back-facing.
    pub shading: f64,
}

#[derive(Debug, Clone)]
pub struct CorrespondenceMap {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<Option<GtSample>>,
}

impl CorrespondenceMap {
    pub fn at(&self, x: usize, y: usize) -> Option<&GtSample> {
        self.samples[y * self.width + x].as_ref()
    }
}

#[derive(Debug, Clone)]
pub struct PairImages {
    pub pair: CapturePair,
    pub patterns: Vec<GrayImage>,
    pub colors: Vec<RgbImage>,
}

#[derive(Debug, Clone)]
pub struct RenderedCapture {
    pub pairs: Vec<PairImages>,
    pub correspondence: Vec<CorrespondenceMap>,
}

struct PixelShade {
    gt: GtSample,
    /// Band responses at unit shading (illuminant-major), pre-multiplied by
    /// the actual shading on use.
    bands: Vec<f64>,
    /// Pattern luminance when the covering projector pixel is on.
    lum: f64,
}

pub fn render_capture(scene: &SyntheticScene) -> Result<RenderedCapture> {
    if scene.noise.sigma < 0.0 {
        return Err(Error::argument("noise sigma must be nonnegative".to_string()));
    }
    let caster = RayCaster::new(&scene.mesh);
    let eps = 1e-4 * scene.mesh.bbox_diagonal();
    let responses = CurveResponses::build(scene)?;

    let mut pairs = Vec::new();
    let mut correspondence = Vec::new();
    for (pair_idx, pair) in scene.pairs.iter().enumerate() {
        let cam = &scene.views[pair.camera.0];
        let proj = &scene.views[pair.projector.0];
        let (w, h) = (cam.intrinsics.width, cam.intrinsics.height);

        // geometry pass, parallel over rows, deterministic
        let shaded: Vec<Option<PixelShade>> = (0..h)
            .into_par_iter()
            .flat_map_iter(|y| {
                let caster = &caster;
                let responses = &responses;
                (0..w).map(move |x| {
                    shade_pixel(scene, caster, responses, cam, proj, eps, x, y)
                })
            })
            .collect();

        let gt = CorrespondenceMap {
            width: w,
            height: h,
            samples: shaded.iter().map(|s| s.as_ref().map(|p| p.gt)).collect(),
        };

        // frame synthesis + noise
        let n_patterns = scene.graycode.pattern_count();
        let mut patterns = vec![GrayImage::new(w, h); n_patterns];
        let mut colors = vec![RgbImage::new(w, h); scene.illuminations.len()];
        let sigma = scene.noise.sigma as f32;
        for (i, s) in shaded.iter().enumerate() {
            let (x, y) = (i % w, i / w);
            if let Some(p) = s {
                let lit = p.gt.shading > 0.0;
                for (f, img) in patterns.iter_mut().enumerate() {
                    let on = lit
                        && scene.graycode.pattern_value(
                            f,
                            p.gt.proj_px.0 as usize,
                            p.gt.proj_px.1 as usize,
                        );
                    if on {
                        img.set(x, y, (p.gt.shading * p.lum) as f32);
                    }
                }
                if lit {
                    for (n, img) in colors.iter_mut().enumerate() {
                        img.set(
                            x,
                            y,
                            [0, 1, 2].map(|m| (p.gt.shading * p.bands[n * 3 + m]) as f32),
                        );
                    }
                }
            }
            if sigma > 0.0 {
                for (f, img) in patterns.iter_mut().enumerate() {
                    let v = img.get(x, y)
                        + sigma
                            * gaussian_field_noise(
                                scene.noise.seed,
                                (pair_idx * 64 + f) as u64,
                                i as u64,
                            ) as f32;
                    img.set(x, y, v);
                }
                for (n, img) in colors.iter_mut().enumerate() {
                    let mut rgb = img.get(x, y);
                    for (m, v) in rgb.iter_mut().enumerate() {
                        *v += sigma
                            * gaussian_field_noise(
                                scene.noise.seed,
                                (pair_idx * 64 + 40 + n) as u64,
                                (i * 3 + m) as u64,
                            ) as f32;
                    }
                    img.set(x, y, rgb);
                }
            }
        }

        pairs.push(PairImages { pair: *pair, patterns, colors });
        correspondence.push(gt);
    }
    Ok(RenderedCapture { pairs, correspondence })
}

#[allow(clippy::too_many_arguments)]
fn shade_pixel(
    scene: &SyntheticScene,
    caster: &RayCaster,
    responses: &CurveResponses,
    cam: &crate::geom::DeviceView,
    proj: &crate::geom::DeviceView,
    eps: f64,
    x: usize,
    y: usize,
) -> Option<PixelShade> {
    let k = &cam.intrinsics;
    let dir_cam = Vector3::new(
        (x as f64 + 0.5 - k.cx) / k.fx,
        (y as f64 + 0.5 - k.cy) / k.fy,
        1.0,
    );
    let origin = cam.pose.center();
    let dir = cam.pose.rotation.inverse() * dir_cam;
    let hit = caster.intersect(&origin, &dir, 1e-9, f64::INFINITY)?;
    let point = origin + dir * hit.t;
    let normal = scene.mesh.shading_normal(hit.triangle, hit.barycentric);

    // projector coverage
    let (pu, pv) = project(proj, &point).ok()?;
    let kp = &proj.intrinsics;
    if pu < 0.0 || pu >= kp.width as f64 || pv < 0.0 || pv >= kp.height as f64 {
        return None;
    }

    // hard shadow toward the projector
    let shadow_origin = point + normal * eps;
    let to_proj = proj.pose.center() - shadow_origin;
    let mut shading = 0.0;
    if !caster.occluded(&shadow_origin, &to_proj, 1e-9, 1.0 - 1e-9) {
        shading = shading_factor(&proj.pose.center(), &point, &Unit::new_normalize(normal))
            .unwrap_or(0.0);
    }

    let bands = responses.at(scene, hit.triangle, hit.barycentric);
    let lum = (bands[18] + bands[19] + bands[20]) / 3.0; // white-illuminant luminance
    Some(PixelShade {
        gt: GtSample {
            proj_px: (pu.floor() as u32, pv.floor() as u32),
            proj_uv: (pu, pv),
            point,
            normal,
            shading,
        },
        bands,
        lum,
    })
}

/// Band responses (unit shading) for every distinct curve in the scene's
/// reflectance field, so per-pixel shading is a blend instead of an integral.
enum CurveResponses {
    Uniform(Vec<f64>),
    PerVertex(Vec<Vec<f64>>),
    Chart { patches: Vec<Vec<f64>>, surround: Vec<f64> },
}

impl CurveResponses {
    fn build(scene: &SyntheticScene) -> Result<Self> {
        let respond = |c: &crate::spectral::SpectralCurve| {
            render_intensity(c, &scene.illuminations, &scene.sensitivity, 1.0)
        };
        Ok(match &scene.reflectance {
            ReflectanceField::Uniform(c) => CurveResponses::Uniform(respond(c)?),
            ReflectanceField::PerVertex(curves) => CurveResponses::PerVertex(
                curves.iter().map(respond).collect::<Result<_>>()?,
            ),
            ReflectanceField::Chart { patches, surround, .. } => CurveResponses::Chart {
                patches: patches.iter().map(respond).collect::<Result<_>>()?,
                surround: respond(surround)?,
            },
        })
    }

    fn at(&self, scene: &SyntheticScene, triangle: usize, bary: [f64; 3]) -> Vec<f64> {
        match self {
            CurveResponses::Uniform(r) => r.clone(),
            CurveResponses::PerVertex(per_vertex) => {
                let idx = scene.mesh.triangles[triangle];
                let n = per_vertex[0].len();
                let mut out = vec![0.0; n];
                for (w, vi) in bary.iter().zip(idx) {
                    for (acc, v) in out.iter_mut().zip(&per_vertex[vi]) {
                        *acc += w * v;
                    }
                }
                out
            }
            CurveResponses::Chart { patches, surround } => {
                let t = scene.mesh.triangles[triangle];
                let p = scene.mesh.vertices[t[0]].coords * bary[0]
                    + scene.mesh.vertices[t[1]].coords * bary[1]
                    + scene.mesh.vertices[t[2]].coords * bary[2];
                let layout = match &scene.reflectance {
                    ReflectanceField::Chart { layout, .. } => layout,
                    _ => unreachable!(),
                };
                match layout.patch_at(p.x, p.y) {
                    Some(i) => patches[i].clone(),
                    None => surround.clone(),
                }
            }
        }
    }
}

/// Counter-based Gaussian noise: a pure hash of (seed, stream, index), so
/// parallel render schedules cannot change the field.
pub fn gaussian_field_noise(seed: u64, stream: u64, index: u64) -> f64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let base = mix(mix(mix(seed) ^ stream) ^ index);
    let second = mix(base ^ 0x6A09_E667_F3BC_C909);
    let u1 = (((base >> 11) as f64) / (1u64 << 53) as f64).max(f64::MIN_POSITIVE);
    let u2 = ((second >> 11) as f64) / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
