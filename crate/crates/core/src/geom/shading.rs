//! Near-light Lambertian shading: inverse-square falloff times the cosine of
//! incidence, clamped at zero for back-facing points.

use crate::error::{Error, Result};
use nalgebra::{Point3, Unit, Vector3};

/// `max(0, (p_pro − p_k)·n_k / ‖p_pro − p_k‖³)`.
///
/// Wavelength-independent: geometry alone decides how much projected light a
/// point receives and re-emits toward any camera.
pub fn shading_factor(
    projector_center: &Point3<f64>,
    point: &Point3<f64>,
    normal: &Unit<Vector3<f64>>,
) -> Result<f64> {
    let d = projector_center - point;
    let dist = d.norm();
    if dist < 1e-12 {
        return Err(Error::argument("projector center coincides with the surface point".to_string()));
    }
    Ok((d.dot(normal) / (dist * dist * dist)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z_normal() -> Unit<Vector3<f64>> {
        Unit::new_normalize(Vector3::z())
    }

    #[test]
    fn frontal_unit_distance_is_one() {
        let s = shading_factor(&Point3::new(0.0, 0.0, 1.0), &Point3::origin(), &z_normal()).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_square_falloff() {
        let s = shading_factor(&Point3::new(0.0, 0.0, 2.0), &Point3::origin(), &z_normal()).unwrap();
        assert!((s - 0.25).abs() < 1e-15);
    }

    #[test]
    fn oblique_projector_at_sqrt_two() {
        // distance √2, incidence cos 1/√2 -> 1/(2√2)
        let s = shading_factor(&Point3::new(1.0, 0.0, 1.0), &Point3::origin(), &z_normal()).unwrap();
        assert!((s - 1.0 / (2.0 * 2.0_f64.sqrt())).abs() < 1e-12);
        assert!((s - 0.35355).abs() < 1e-5);
    }

    #[test]
    fn back_facing_clamps_to_zero() {
        let s = shading_factor(&Point3::new(0.0, 0.0, -1.0), &Point3::origin(), &z_normal()).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn coincident_points_error() {
        assert!(shading_factor(&Point3::origin(), &Point3::origin(), &z_normal()).is_err());
    }

    #[test]
    fn scales_inverse_squared_with_scene_size() {
        let p = Point3::new(0.4, 0.2, 1.3);
        let q = Point3::new(-0.1, 0.05, 0.0);
        let n = Unit::new_normalize(Vector3::new(0.2, -0.1, 1.0));
        let s1 = shading_factor(&p, &q, &n).unwrap();
        for scale in [0.5, 2.0, 10.0] {
            let s2 = shading_factor(
                &Point3::from(p.coords * scale),
                &Point3::from(q.coords * scale),
                &n,
            )
            .unwrap();
            assert!((s2 - s1 / (scale * scale)).abs() < 1e-12 * s1.max(1.0));
        }
    }
}
