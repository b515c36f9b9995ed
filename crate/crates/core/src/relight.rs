//! Spectral relighting of a reconstructed model: per-point radiance under
//! arbitrary point lights with arbitrary spectra, splatted into a requested
//! view.

use crate::error::{Error, Result};
use crate::geom::{project, shading_factor, DeviceView, OrientedPoint, RayCaster};
use crate::img::RgbImage;
use crate::spectral::{SensitivityMatrix, SpectralCurve};
use nalgebra::Point3;

#[derive(Debug, Clone)]
pub struct PointLight {
    pub position: Point3<f64>,
    pub spectrum: SpectralCurve,
}

/// Sensor RGB a point re-emits toward any camera under the given lights,
/// additive over lights: `Σ s(p, light) · ∫ c·l·r`.
pub fn point_radiance(
    point: &OrientedPoint,
    reflectance: &SpectralCurve,
    lights: &[PointLight],
    sens: &SensitivityMatrix,
    shadow_caster: Option<(&RayCaster, f64)>,
) -> Result<[f64; 3]> {
    if lights.is_empty() {
        return Err(Error::argument("relighting needs at least one light".to_string()));
    }
    let mut rgb = [0.0; 3];
    for light in lights {
        if light.spectrum.grid != reflectance.grid || sens.grid != reflectance.grid {
            return Err(Error::config("relight spectra must share the model grid".to_string()));
        }
        if let Some((caster, eps)) = shadow_caster {
            let origin = point.position + point.normal.as_ref() * eps;
            let dir = light.position - origin;
            if caster.occluded(&origin, &dir, 1e-9, 1.0 - 1e-9) {
                continue;
            }
        }
        let s = shading_factor(&light.position, &point.position, &point.normal)?;
        if s <= 0.0 {
            continue;
        }
        for (m, channel) in sens.rows.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..reflectance.grid.count {
                acc += channel.values[i] * light.spectrum.values[i] * reflectance.values[i];
            }
            rgb[m] += s * acc;
        }
    }
    Ok(rgb)
}

/// Splat the relit points into `view` with a z-buffer.
pub fn render_relit(
    points: &[OrientedPoint],
    reflectances: &[SpectralCurve],
    lights: &[PointLight],
    sens: &SensitivityMatrix,
    view: &DeviceView,
    splat_radius: f64,
    shadow_caster: Option<(&RayCaster, f64)>,
) -> Result<RgbImage> {
    if points.len() != reflectances.len() {
        return Err(Error::argument("points and reflectances must align".to_string()));
    }
    let (w, h) = (view.intrinsics.width, view.intrinsics.height);
    let mut img = RgbImage::new(w, h);
    let mut depth = vec![f32::INFINITY; w * h];
    let r = splat_radius.max(0.5);

    for (point, refl) in points.iter().zip(reflectances) {
        let Ok((u, v)) = project(view, &point.position) else { continue };
        if u < -r || u >= w as f64 + r || v < -r || v >= h as f64 + r {
            continue;
        }
        let z = view.pose.transform(&point.position).z as f32;
        let rgb = point_radiance(point, refl, lights, sens, shadow_caster)?;
        let rgb = [rgb[0] as f32, rgb[1] as f32, rgb[2] as f32];

        let x0 = ((u - r).floor().max(0.0)) as usize;
        let x1 = ((u + r).ceil().min(w as f64 - 1.0)) as usize;
        let y0 = ((v - r).floor().max(0.0)) as usize;
        let y1 = ((v + r).ceil().min(h as f64 - 1.0)) as usize;
        for py in y0..=y1 {
            for px in x0..=x1 {
                let dx = px as f64 + 0.5 - u;
                let dy = py as f64 + 0.5 - v;
                if dx * dx + dy * dy > r * r {
                    continue;
                }
                let idx = py * w + px;
                if z < depth[idx] {
                    depth[idx] = z;
                    img.set(px, py, rgb);
                }
            }
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{DeviceKind, Intrinsics, Pose, ViewId};
    use crate::spectral::{default_sensitivity, WavelengthGrid};
    use nalgebra::{Unit, Vector3};

    fn setup() -> (OrientedPoint, SpectralCurve, SensitivityMatrix) {
        let grid = WavelengthGrid::default();
        let point = OrientedPoint {
            position: Point3::origin(),
            normal: Unit::new_normalize(Vector3::z()),
        };
        (point, SpectralCurve::constant(grid, 0.5), default_sensitivity(&grid))
    }

    #[test]
    fn two_lights_sum_to_the_individual_contributions() {
        let (point, refl, sens) = setup();
        let grid = refl.grid;
        let a = PointLight {
            position: Point3::new(0.0, 0.0, 1.0),
            spectrum: SpectralCurve::constant(grid, 0.8),
        };
        let b = PointLight {
            position: Point3::new(0.7, 0.2, 1.4),
            spectrum: SpectralCurve::constant(grid, 0.3),
        };
        let ra = point_radiance(&point, &refl, &[a.clone()], &sens, None).unwrap();
        let rb = point_radiance(&point, &refl, &[b.clone()], &sens, None).unwrap();
        let rab = point_radiance(&point, &refl, &[a, b], &sens, None).unwrap();
        for m in 0..3 {
            assert!((rab[m] - (ra[m] + rb[m])).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_light_list_is_an_argument_error() {
        let (point, refl, sens) = setup();
        assert!(point_radiance(&point, &refl, &[], &sens, None).is_err());
    }

    #[test]
    fn splatting_respects_the_z_buffer() {
        let grid = WavelengthGrid::default();
        let sens = default_sensitivity(&grid);
        let view = DeviceView {
            id: ViewId(0),
            kind: DeviceKind::Camera,
            intrinsics: Intrinsics::centered(100.0, 64, 64).unwrap(),
            pose: Pose::look_at(&Point3::new(0.0, 0.0, 3.0), &Point3::origin(), &Vector3::y()).unwrap(),
        };
        // two points on the optical axis: near one bright, far one dark
        let near = OrientedPoint {
            position: Point3::new(0.0, 0.0, 1.0),
            normal: Unit::new_normalize(Vector3::z()),
        };
        let far = OrientedPoint {
            position: Point3::origin(),
            normal: Unit::new_normalize(Vector3::z()),
        };
        let bright = SpectralCurve::constant(grid, 0.9);
        let dark = SpectralCurve::constant(grid, 0.05);
        let light = PointLight {
            position: Point3::new(0.0, 0.0, 2.5),
            spectrum: SpectralCurve::constant(grid, 1.0),
        };
        let img = render_relit(
            &[far, near],
            &[dark.clone(), bright.clone()],
            &[light.clone()],
            &sens,
            &view,
            2.0,
            None,
        )
        .unwrap();
        let center = img.get(32, 32);
        // the near point must win the depth test
        let expected = point_radiance(&near, &bright, &[light], &sens, None).unwrap();
        assert!((center[0] as f64 - expected[0]).abs() < 1e-5);
        assert!(center[0] > 0.0);
    }
}
