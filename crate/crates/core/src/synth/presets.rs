//! Scene presets: a 24-patch color chart on a shallow tray, a textured
//! sphere, and a bumpy sculpture-like blob, each wrapped in the alternating
//! projector/camera acquisition walk.

use super::{
    CapturePair, ChartLayout, MotionStep, NoiseSpec, ReflectanceField, SyntheticScene,
};
use crate::error::{Error, Result};
use crate::geom::{DeviceKind, DeviceView, Intrinsics, Pose, TriangleMesh, ViewId};
use crate::graycode::GrayCodeSpec;
use crate::spectral::{
    chart_reflectances, default_illuminations, default_sensitivity, fit_basis, training_reflectances,
    BasisMean, SpectralCurve, WavelengthGrid,
};
use nalgebra::{Point3, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Optional knobs on top of a preset's defaults.
#[derive(Debug, Clone, Default)]
pub struct SceneOverrides {
    pub n_projectors: Option<usize>,
    pub n_cameras: Option<usize>,
    pub proj_resolution: Option<(usize, usize)>,
    pub cam_resolution: Option<(usize, usize)>,
    pub proj_focal: Option<f64>,
    pub cam_focal: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
    /// Replace the reflectance field by its projection onto the default
    /// 8-function basis (exact-recovery scenarios).
    pub reflectance_in_span: bool,
    /// Sphere preset: radius and tessellation level.
    pub sphere_radius: Option<f64>,
    pub sphere_tessellation: Option<usize>,
}

pub fn build_scene(preset: &str, overrides: &SceneOverrides) -> Result<SyntheticScene> {
    match preset {
        "colorchart" => build_chart(overrides),
        "sphere" => build_sphere(overrides),
        "blob" => build_blob(overrides),
        other => Err(Error::argument(format!(
            "unknown preset '{other}' (available: colorchart, sphere, blob)"
        ))),
    }
}

struct RigSpec {
    n_proj: usize,
    n_cam: usize,
    arc_span: f64,
    cam_distance: f64,
    proj_distance: f64,
    /// (even, odd) elevations in radians
    cam_elevation: (f64, f64),
    proj_elevation: (f64, f64),
    cam_intrinsics: Intrinsics,
    proj_intrinsics: Intrinsics,
}

/// Device placements and the capture walk: projector i pairs with cameras i
/// and i+1, devices alternating one move at a time around the object.
fn arc_rig(spec: &RigSpec) -> Result<(Vec<DeviceView>, Vec<CapturePair>, Vec<MotionStep>)> {
    if spec.n_cam != spec.n_proj + 1 {
        return Err(Error::argument(format!(
            "the alternating walk needs one more camera than projectors, got {} cameras / {} projectors",
            spec.n_cam, spec.n_proj
        )));
    }
    let eye = |azimuth: f64, elevation: f64, r: f64| {
        Point3::new(
            r * elevation.cos() * azimuth.cos(),
            r * elevation.cos() * azimuth.sin(),
            r * elevation.sin(),
        )
    };
    let target = Point3::origin();
    let up = Vector3::z();

    let cam_azimuth =
        |j: usize| -spec.arc_span / 2.0 + spec.arc_span * j as f64 / (spec.n_cam - 1) as f64;

    let mut views = Vec::new();
    for i in 0..spec.n_proj {
        let azimuth = 0.5 * (cam_azimuth(i) + cam_azimuth(i + 1));
        let elevation =
            if i % 2 == 0 { spec.proj_elevation.0 } else { spec.proj_elevation.1 };
        views.push(DeviceView {
            id: ViewId(i),
            kind: DeviceKind::Projector,
            intrinsics: spec.proj_intrinsics,
            pose: Pose::look_at(&eye(azimuth, elevation, spec.proj_distance), &target, &up)?,
        });
    }
    for j in 0..spec.n_cam {
        let elevation = if j % 2 == 0 { spec.cam_elevation.0 } else { spec.cam_elevation.1 };
        views.push(DeviceView {
            id: ViewId(spec.n_proj + j),
            kind: DeviceKind::Camera,
            intrinsics: spec.cam_intrinsics,
            pose: Pose::look_at(&eye(cam_azimuth(j), elevation, spec.cam_distance), &target, &up)?,
        });
    }

    let mut pairs = Vec::new();
    let mut motions = Vec::new();
    for i in 0..spec.n_proj {
        let proj = ViewId(i);
        pairs.push(CapturePair { projector: proj, camera: ViewId(spec.n_proj + i) });
        motions.push(if i == 0 { MotionStep::Start } else { MotionStep::ProjectorMoved });
        pairs.push(CapturePair { projector: proj, camera: ViewId(spec.n_proj + i + 1) });
        motions.push(MotionStep::CameraMoved);
    }
    Ok((views, pairs, motions))
}

fn resolve_counts(o: &SceneOverrides) -> (usize, usize) {
    let n_proj = o.n_projectors.unwrap_or(4);
    let n_cam = o.n_cameras.unwrap_or(n_proj + 1);
    (n_proj, n_cam)
}

fn project_field_in_span(grid: &WavelengthGrid, curves: &mut [SpectralCurve]) {
    let basis = fit_basis(&training_reflectances(grid), 8, BasisMean::Zero)
        .expect("bundled training set fits");
    for c in curves.iter_mut() {
        let alpha = basis.project(c).unwrap();
        *c = basis.reconstruct(&alpha).unwrap();
    }
}

/// The fixed board geometry of the colorchart preset.
pub fn chart_layout() -> ChartLayout {
    ChartLayout {
        origin: (-0.2975, -0.1975),
        patch_size: 0.095,
        gutter: 0.005,
        rows: 4,
        cols: 6,
    }
}

fn build_chart(o: &SceneOverrides) -> Result<SyntheticScene> {
    let grid = WavelengthGrid::default();
    let (n_proj, n_cam) = resolve_counts(o);
    let (pw, ph) = o.proj_resolution.unwrap_or((96, 96));
    let (cw, ch) = o.cam_resolution.unwrap_or((320, 240));

    let layout = chart_layout();
    let mesh = chart_tray_mesh();

    let rig = RigSpec {
        n_proj,
        n_cam,
        arc_span: 130f64.to_radians(),
        cam_distance: 1.9,
        proj_distance: 1.35,
        cam_elevation: (55f64.to_radians(), 62f64.to_radians()),
        proj_elevation: (38f64.to_radians(), 44f64.to_radians()),
        cam_intrinsics: Intrinsics::centered(o.cam_focal.unwrap_or(620.0), cw, ch)?,
        proj_intrinsics: Intrinsics::centered(o.proj_focal.unwrap_or(135.0), pw, ph)?,
    };
    let (views, pairs, motions) = arc_rig(&rig)?;

    let mut patches = chart_reflectances(&grid);
    let mut surround = SpectralCurve::constant(grid, 0.35);
    if o.reflectance_in_span {
        project_field_in_span(&grid, &mut patches);
        project_field_in_span(&grid, std::slice::from_mut(&mut surround));
    }

    Ok(SyntheticScene {
        name: "colorchart".to_string(),
        mesh,
        reflectance: ReflectanceField::Chart { patches, layout, surround },
        views,
        pairs,
        motions,
        graycode: GrayCodeSpec::new(pw, ph)?,
        illuminations: default_illuminations(&grid),
        sensitivity: default_sensitivity(&grid),
        grid,
        noise: NoiseSpec { sigma: o.noise_sigma.unwrap_or(0.0), seed: o.seed.unwrap_or(0) },
    })
}

/// The chart plane plus a shallow raised tray rim. The rim gives the board
/// depth relief, without which every feature would be coplanar and two-view
/// geometry would be degenerate.
fn chart_tray_mesh() -> TriangleMesh {
    let (hx, hy) = (0.42, 0.32); // plane half-extent
    let (ox, oy, oz) = (0.50, 0.40, 0.07); // rim outer half-extent and height
    let mut vertices = vec![
        // plane
        Point3::new(-hx, -hy, 0.0),
        Point3::new(hx, -hy, 0.0),
        Point3::new(hx, hy, 0.0),
        Point3::new(-hx, hy, 0.0),
        // rim outer top ring
        Point3::new(-ox, -oy, oz),
        Point3::new(ox, -oy, oz),
        Point3::new(ox, oy, oz),
        Point3::new(-ox, oy, oz),
    ];
    let mut triangles = vec![[0, 1, 2], [0, 2, 3]];
    // four slanted rim walls from the plane edge to the outer ring, wound so
    // their normals point up and outward
    for (a, b, c, d) in [(0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)] {
        triangles.push([a, c, b]);
        triangles.push([a, d, c]);
    }
    let mut mesh = TriangleMesh::new(std::mem::take(&mut vertices), triangles).unwrap();
    mesh.compute_vertex_normals();
    // the chart face must shade as an exact plane: force +z on its corners
    if let Some(normals) = mesh.vertex_normals.as_mut() {
        for n in normals.iter_mut().take(4) {
            *n = Vector3::z();
        }
    }
    mesh
}

fn build_sphere(o: &SceneOverrides) -> Result<SyntheticScene> {
    let radius = o.sphere_radius.unwrap_or(0.35);
    let tessellation = o.sphere_tessellation.unwrap_or(32);
    let mesh = uv_sphere(radius, tessellation, |_, _| 1.0);
    round_object_scene("sphere", o, mesh, radius)
}

fn build_blob(o: &SceneOverrides) -> Result<SyntheticScene> {
    let radius = o.sphere_radius.unwrap_or(0.35);
    let tessellation = o.sphere_tessellation.unwrap_or(48);
    let seed = o.seed.unwrap_or(0);
    let mut rng = StdRng::seed_from_u64(seed ^ 0xB10B);
    // low-order angular bumps make it sculpture-like but still star-shaped
    let lobes: Vec<(f64, f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.03..0.09),
                rng.gen_range(1.0..4.0f64).round(),
                rng.gen_range(1.0..3.0f64).round(),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut mesh = uv_sphere(radius, tessellation, |theta, phi| {
        let mut f = 1.0;
        for (a, k, m, p, q) in &lobes {
            f += a * (k * phi + p).cos() * (m * theta + q).sin();
        }
        f
    });
    // bumpy surface: smooth normals from the actual geometry
    mesh.compute_vertex_normals();
    round_object_scene("blob", o, mesh, radius * 1.12)
}

fn round_object_scene(
    name: &str,
    o: &SceneOverrides,
    mesh: TriangleMesh,
    object_radius: f64,
) -> Result<SyntheticScene> {
    let grid = WavelengthGrid::default();
    let (n_proj, n_cam) = resolve_counts(o);
    let (pw, ph) = o.proj_resolution.unwrap_or((96, 96));
    let (cw, ch) = o.cam_resolution.unwrap_or((320, 240));

    let cam_distance = 2.0;
    let proj_distance = 1.5;
    let fit = 1.25; // margin around the object in the frame
    let cam_focal = o
        .cam_focal
        .unwrap_or_else(|| 0.5 * cw as f64 * cam_distance / (object_radius * fit));
    let proj_focal = o
        .proj_focal
        .unwrap_or_else(|| 0.5 * pw as f64 * proj_distance / (object_radius * fit));

    let rig = RigSpec {
        n_proj,
        n_cam,
        arc_span: 150f64.to_radians(),
        cam_distance,
        proj_distance,
        cam_elevation: (20f64.to_radians(), 42f64.to_radians()),
        proj_elevation: (30f64.to_radians(), 12f64.to_radians()),
        cam_intrinsics: Intrinsics::centered(cam_focal, cw, ch)?,
        proj_intrinsics: Intrinsics::centered(proj_focal, pw, ph)?,
    };
    let (views, pairs, motions) = arc_rig(&rig)?;

    let mut curves = smooth_vertex_field(&mesh, &grid, o.seed.unwrap_or(0));
    if o.reflectance_in_span {
        project_field_in_span(&grid, &mut curves);
    }

    Ok(SyntheticScene {
        name: name.to_string(),
        mesh,
        reflectance: ReflectanceField::PerVertex(curves),
        views,
        pairs,
        motions,
        graycode: GrayCodeSpec::new(pw, ph)?,
        illuminations: default_illuminations(&grid),
        sensitivity: default_sensitivity(&grid),
        grid,
        noise: NoiseSpec { sigma: o.noise_sigma.unwrap_or(0.0), seed: o.seed.unwrap_or(0) },
    })
}

/// Latitude-longitude sphere with radial modulation: `tessellation` latitude
/// rings and `2·tessellation` segments, so the vertex count is
/// `(tessellation − 1) · 2·tessellation + 2`.
pub fn uv_sphere(radius: f64, tessellation: usize, modulate: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    let rings = tessellation.max(3);
    let segments = 2 * rings;
    let mut vertices = Vec::new();
    let mut normals = Vec::new();

    vertices.push(Point3::new(0.0, 0.0, radius * modulate(0.0, 0.0)));
    normals.push(Vector3::z());
    for r in 1..rings {
        let theta = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = std::f64::consts::TAU * s as f64 / segments as f64;
            let dir = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            vertices.push(Point3::from(dir * radius * modulate(theta, phi)));
            normals.push(dir);
        }
    }
    vertices.push(Point3::new(0.0, 0.0, -radius * modulate(std::f64::consts::PI, 0.0)));
    normals.push(-Vector3::z());

    let mut triangles = Vec::new();
    let ring_start = |r: usize| 1 + (r - 1) * segments;
    for s in 0..segments {
        triangles.push([0, ring_start(1) + s, ring_start(1) + (s + 1) % segments]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let a = ring_start(r) + s;
            let b = ring_start(r) + (s + 1) % segments;
            let c = ring_start(r + 1) + s;
            let d = ring_start(r + 1) + (s + 1) % segments;
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    let south = vertices.len() - 1;
    for s in 0..segments {
        triangles.push([south, ring_start(rings - 1) + (s + 1) % segments, ring_start(rings - 1) + s]);
    }

    let mut mesh = TriangleMesh::new(vertices, triangles).unwrap();
    mesh.vertex_normals = Some(normals); // analytic for the pure sphere
    mesh
}

/// Smooth per-vertex reflectance: a position-weighted blend of a handful of
/// library curves.
fn smooth_vertex_field(
    mesh: &TriangleMesh,
    grid: &WavelengthGrid,
    seed: u64,
) -> Vec<SpectralCurve> {
    let library = training_reflectances(grid);
    let mut rng = StdRng::seed_from_u64(seed ^ 0xF1E1D);
    let anchors: Vec<(Vector3<f64>, &SpectralCurve)> = (0..6)
        .map(|_| {
            let dir = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            let curve = &library[rng.gen_range(0..library.len())];
            (dir, curve)
        })
        .collect();

    mesh.vertices
        .iter()
        .map(|v| {
            let dir = v.coords.normalize();
            let mut weights: Vec<f64> = anchors
                .iter()
                .map(|(a, _)| ((1.0 + dir.dot(a)) / 2.0).powi(3))
                .collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let mut values = vec![0.0; grid.count];
            for ((_, curve), w) in anchors.iter().zip(&weights) {
                for (acc, x) in values.iter_mut().zip(&curve.values) {
                    *acc += w * x;
                }
            }
            SpectralCurve { grid: *grid, values }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_preset_has_24_patches_and_the_full_walk() {
        let scene = build_scene("colorchart", &SceneOverrides::default()).unwrap();
        match &scene.reflectance {
            ReflectanceField::Chart { patches, layout, .. } => {
                assert_eq!(patches.len(), 24);
                assert_eq!(layout.rows * layout.cols, 24);
            }
            _ => panic!("chart scene must use the chart field"),
        }
        assert_eq!(scene.views.len(), 9); // 4 projectors + 5 cameras
        assert_eq!(scene.pairs.len(), 8);
        assert_eq!(scene.motions[0], MotionStep::Start);
        // strict alternation after the start
        for (i, m) in scene.motions.iter().enumerate().skip(1) {
            let expected =
                if i % 2 == 1 { MotionStep::CameraMoved } else { MotionStep::ProjectorMoved };
            assert_eq!(*m, expected, "motion {i}");
        }
    }

    #[test]
    fn every_pair_shares_viewing_overlap() {
        // consecutive projector and camera must both see the object center
        let scene = build_scene("blob", &SceneOverrides::default()).unwrap();
        for pair in &scene.pairs {
            for id in [pair.projector, pair.camera] {
                let v = &scene.views[id.0];
                let (u, w) = crate::geom::project(v, &Point3::origin()).unwrap();
                assert!(u > 0.0 && u < v.intrinsics.width as f64);
                assert!(w > 0.0 && w < v.intrinsics.height as f64);
            }
        }
    }

    #[test]
    fn sphere_vertex_count_matches_formula() {
        for (r, n) in [(0.3, 8), (1.0, 16), (0.5, 32)] {
            let mesh = uv_sphere(r, n, |_, _| 1.0);
            assert_eq!(mesh.vertices.len(), (n - 1) * 2 * n + 2);
        }
    }

    #[test]
    fn chart_layout_separates_patches_and_gutters() {
        let layout = ChartLayout {
            origin: (-0.2975, -0.1975),
            patch_size: 0.095,
            gutter: 0.005,
            rows: 4,
            cols: 6,
        };
        assert_eq!(layout.patch_at(-0.25, -0.15), Some(0));
        let (cx, cy) = layout.patch_center(23);
        assert_eq!(layout.patch_at(cx, cy), Some(23));
        assert_eq!(layout.patch_at(-0.2975 + 0.0975, -0.15), None); // gutter
        assert_eq!(layout.patch_at(5.0, 0.0), None);
    }

    #[test]
    fn same_seed_builds_identical_scenes() {
        let a = build_scene("blob", &SceneOverrides { seed: Some(7), ..Default::default() }).unwrap();
        let b = build_scene("blob", &SceneOverrides { seed: Some(7), ..Default::default() }).unwrap();
        assert_eq!(a.mesh.vertices.len(), b.mesh.vertices.len());
        for (va, vb) in a.mesh.vertices.iter().zip(&b.mesh.vertices) {
            assert_eq!(va, vb);
        }
        match (&a.reflectance, &b.reflectance) {
            (ReflectanceField::PerVertex(ca), ReflectanceField::PerVertex(cb)) => {
                assert_eq!(ca.len(), cb.len());
                for (x, y) in ca.iter().zip(cb) {
                    assert_eq!(x.values, y.values);
                }
            }
            _ => panic!(),
        }
        let c = build_scene("blob", &SceneOverrides { seed: Some(8), ..Default::default() }).unwrap();
        assert_ne!(a.mesh.vertices, c.mesh.vertices);
    }

    #[test]
    fn unknown_preset_is_an_argument_error() {
        assert!(build_scene("teapot", &SceneOverrides::default()).is_err());
    }
}
