//! Multi-view linear (DLT) triangulation.

use super::{DeviceView, project};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, Matrix3x4, Point3};

/// Least-squares point from two or more pixel observations.
///
/// Builds the standard homogeneous system from `u·P₃ − P₁` and `v·P₃ − P₂`
/// rows and takes the smallest right singular vector. Observations are
/// pre-scaled by each view's focal length so pixel noise weights views
/// comparably.
pub fn triangulate(observations: &[(&DeviceView, (f64, f64))]) -> Result<Point3<f64>> {
    if observations.len() < 2 {
        return Err(Error::argument(format!(
            "triangulation needs at least 2 observations, got {}",
            observations.len()
        )));
    }

    let mut a = DMatrix::zeros(2 * observations.len(), 4);
    for (row, (view, (u, v))) in observations.iter().enumerate() {
        let k = &view.intrinsics;
        let r = view.pose.rotation.matrix();
        let t = &view.pose.translation;
        // normalized projection matrix [R | t] with pixel -> metric scaling
        let p = Matrix3x4::new(
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        );
        let xn = (u - k.cx) / k.fx;
        let yn = (v - k.cy) / k.fy;
        for col in 0..4 {
            a[(2 * row, col)] = xn * p[(2, col)] - p[(0, col)];
            a[(2 * row + 1, col)] = yn * p[(2, col)] - p[(1, col)];
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Degenerate("SVD failed".to_string()))?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    // a well-posed system has exactly one (near-)zero singular value
    if sv[2] <= 1e-9 * sv[0] {
        return Err(Error::Degenerate(
            "triangulation system is rank deficient (parallel rays or zero baseline)".to_string(),
        ));
    }

    // row of v_t matching the smallest singular value
    let min_idx = (0..svd.singular_values.len())
        .min_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap())
        .unwrap();
    let h = v_t.row(min_idx);
    if h[3].abs() < 1e-12 {
        return Err(Error::Degenerate("triangulated point at infinity".to_string()));
    }
    Ok(Point3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
}

/// Root-mean-square reprojection error of a point over its observations.
/// Observations behind a view count as infinite error.
pub fn reprojection_rms(point: &Point3<f64>, observations: &[(&DeviceView, (f64, f64))]) -> f64 {
    let mut acc = 0.0;
    for (view, (u, v)) in observations {
        match project(view, point) {
            Ok((pu, pv)) => {
                acc += (pu - u).powi(2) + (pv - v).powi(2);
            }
            Err(_) => return f64::INFINITY,
        }
    }
    (acc / observations.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{DeviceKind, Intrinsics, Pose, ViewId};
    use nalgebra::{Point3, Vector3};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn view_at(id: usize, eye: Point3<f64>) -> DeviceView {
        DeviceView {
            id: ViewId(id),
            kind: DeviceKind::Camera,
            intrinsics: Intrinsics::centered(800.0, 1024, 768).unwrap(),
            pose: Pose::look_at(&eye, &Point3::origin(), &Vector3::z()).unwrap(),
        }
    }

    #[test]
    fn exact_pixels_recover_the_point() {
        let va = view_at(0, Point3::new(2.0, 0.0, 1.0));
        let vb = view_at(1, Point3::new(0.0, 2.0, 1.2));
        let p = Point3::new(0.1, -0.05, 0.2);
        let oa = project(&va, &p).unwrap();
        let ob = project(&vb, &p).unwrap();
        let rec = triangulate(&[(&va, oa), (&vb, ob)]).unwrap();
        assert!((rec - p).norm() < 1e-9);
    }

    #[test]
    fn duplicated_view_is_degenerate() {
        let va = view_at(0, Point3::new(2.0, 0.0, 1.0));
        let p = Point3::new(0.0, 0.0, 0.1);
        let o = project(&va, &p).unwrap();
        assert!(matches!(triangulate(&[(&va, o), (&va, o)]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn single_observation_is_an_argument_error() {
        let va = view_at(0, Point3::new(2.0, 0.0, 1.0));
        assert!(matches!(triangulate(&[(&va, (10.0, 10.0))]), Err(Error::Argument(_))));
    }

    #[test]
    fn triangulate_project_round_trip_randomized() {
        let mut rng = StdRng::seed_from_u64(5);
        let views: Vec<_> = (0..4)
            .map(|i| {
                let angle = i as f64 * 0.8;
                view_at(i, Point3::new(2.0 * angle.cos(), 2.0 * angle.sin(), 0.9))
            })
            .collect();
        for _ in 0..100 {
            let p = Point3::new(
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
            );
            let obs: Vec<_> = views.iter().map(|v| (v, project(v, &p).unwrap())).collect();
            let rec = triangulate(&obs).unwrap();
            assert!((rec - p).norm() < 1e-9, "error {}", (rec - p).norm());
        }
    }

    #[test]
    fn noise_error_stays_within_geometric_bound() {
        // Monte-Carlo: with σ = 0.2 px noise over 4 views the recovered point
        // stays within 3·σ·Z²/(f·baseline) of a nonlinearly refined solution.
        let mut rng = StdRng::seed_from_u64(17);
        let views: Vec<_> = (0..4)
            .map(|i| {
                let angle = i as f64 * std::f64::consts::FRAC_PI_6;
                view_at(i, Point3::new(2.0 * angle.cos(), 2.0 * angle.sin(), 0.8))
            })
            .collect();
        let sigma = 0.2;
        let z = 2.0; // all views ~2 units from the origin
        let f = 800.0;
        let baseline = 1.0; // ~min pairwise baseline of the ring
        let bound = 3.0 * sigma * z * z / (f * baseline);

        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let p = Point3::new(
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
            );
            let obs: Vec<_> = views
                .iter()
                .map(|v| {
                    let (u, w) = project(v, &p).unwrap();
                    let noisy = (
                        u + sigma * rand_normal(&mut rng),
                        w + sigma * rand_normal(&mut rng),
                    );
                    (v, noisy)
                })
                .collect();
            let linear = triangulate(&obs).unwrap();
            let refined = refine_gauss_newton(linear, &obs);
            worst = worst.max((linear - refined).norm());
        }
        assert!(worst < bound, "worst deviation {worst} exceeds bound {bound}");
    }

    fn rand_normal(rng: &mut StdRng) -> f64 {
        // Box-Muller
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Oracle: straightforward Gauss-Newton on the reprojection residuals.
    fn refine_gauss_newton(mut p: Point3<f64>, obs: &[(&DeviceView, (f64, f64))]) -> Point3<f64> {
        for _ in 0..20 {
            let mut jtj = nalgebra::Matrix3::zeros();
            let mut jtr = Vector3::zeros();
            for (view, (u, v)) in obs {
                let k = &view.intrinsics;
                let d = view.pose.transform(&p);
                let r = view.pose.rotation.matrix();
                let (x, y, z) = (d.x, d.y, d.z);
                let ru = k.fx * x / z + k.cx - u;
                let rv = k.fy * y / z + k.cy - v;
                let du = (Vector3::new(k.fx / z, 0.0, -k.fx * x / (z * z)).transpose() * r).transpose();
                let dv = (Vector3::new(0.0, k.fy / z, -k.fy * y / (z * z)).transpose() * r).transpose();
                jtj += du * du.transpose() + dv * dv.transpose();
                jtr += du * ru + dv * rv;
            }
            if let Some(step) = jtj.lu().solve(&jtr) {
                p -= step;
                if step.norm() < 1e-14 {
                    break;
                }
            } else {
                break;
            }
        }
        p
    }
}
