//! Closed-form similarity alignment (Umeyama): the evaluation bridge between
//! a reconstruction's arbitrary gauge and ground truth.

use crate::error::{Error, Result};
use crate::geom::Pose;
use nalgebra::{Matrix3, Point3, Rotation3, Vector3};

/// `q ≈ scale · rotation · p + translation`.
#[derive(Debug, Clone, Copy)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    /// The pose of a device after mapping its frame through this similarity:
    /// if `pose` maps world→device in the source frame, the result projects
    /// mapped points to the same pixels (the device frame rescales with the
    /// scene, which a pinhole cannot observe).
    pub fn apply_to_pose(&self, pose: &Pose) -> Pose {
        // X_src = (1/s) Rᵀ (X_dst − t); rescale the device frame by s to stay rigid
        let rot = pose.rotation * self.rotation.inverse();
        let trans = self.scale * pose.translation - rot * self.translation;
        Pose::from_parts(rot, trans)
    }
}

/// Least-squares similarity from `src` onto `dst`.
///
/// Requires three or more non-collinear correspondences.
pub fn align_similarity(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Result<Similarity> {
    if src.len() != dst.len() {
        return Err(Error::argument("correspondence lists differ in length".to_string()));
    }
    if src.len() < 3 {
        return Err(Error::argument(format!("alignment needs >= 3 points, got {}", src.len())));
    }
    let n = src.len() as f64;
    let mean_src = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mean_dst = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;

    let mut cov = Matrix3::zeros();
    let mut var_src = 0.0;
    for (p, q) in src.iter().zip(dst) {
        let dp = p.coords - mean_src;
        let dq = q.coords - mean_dst;
        cov += dq * dp.transpose();
        var_src += dp.norm_squared();
    }
    cov /= n;
    var_src /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    // collinear input leaves the rotation about the line undetermined
    if svd.singular_values[1] < 1e-12 * svd.singular_values[0].max(1e-300) {
        return Err(Error::Degenerate("alignment points are collinear".to_string()));
    }
    let det = (u * v_t).determinant();
    let mut d = Matrix3::identity();
    d[(2, 2)] = det.signum();
    let rotation = Rotation3::from_matrix_unchecked(u * d * v_t);

    let trace = (svd.singular_values[0] + svd.singular_values[1] + det.signum() * svd.singular_values[2])
        .max(1e-300);
    if var_src < 1e-300 {
        return Err(Error::Degenerate("alignment source points coincide".to_string()));
    }
    let scale = trace / var_src;
    let translation = mean_dst - scale * (rotation * mean_src);
    Ok(Similarity { scale, rotation, translation })
}

/// Convenience: RMS distance between mapped `src` and `dst`.
pub fn apply_similarity(sim: &Similarity, src: &[Point3<f64>], dst: &[Point3<f64>]) -> f64 {
    let n = src.len().min(dst.len());
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = src
        .iter()
        .zip(dst)
        .map(|(p, q)| (sim.apply(p) - q).norm_squared())
        .sum();
    (sum / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn cloud(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect()
    }

    #[test]
    fn identity_on_self() {
        let pts = cloud(50, 1);
        let sim = align_similarity(&pts, &pts).unwrap();
        assert!((sim.scale - 1.0).abs() < 1e-12);
        assert!((sim.rotation.matrix() - nalgebra::Matrix3::identity()).norm() < 1e-12);
        assert!(sim.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_pure_scaling() {
        let pts = cloud(50, 2);
        let scaled: Vec<_> = pts.iter().map(|p| Point3::from(p.coords * 2.0)).collect();
        let sim = align_similarity(&pts, &scaled).unwrap();
        assert!((sim.scale - 2.0).abs() < 1e-12);
        assert!((sim.rotation.matrix() - nalgebra::Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn recovers_random_similarity_to_1e10() {
        let pts = cloud(100, 3);
        let rot = Rotation3::new(Vector3::new(0.3, -0.8, 0.5));
        let t = Vector3::new(2.0, -1.0, 0.25);
        let s = 0.37;
        let mapped: Vec<_> = pts.iter().map(|p| Point3::from(s * (rot * p.coords) + t)).collect();
        let sim = align_similarity(&pts, &mapped).unwrap();
        assert!((sim.scale - s).abs() < 1e-10);
        assert!((sim.rotation.matrix() - rot.matrix()).norm() < 1e-10);
        assert!((sim.translation - t).norm() < 1e-10);
        assert!(apply_similarity(&sim, &pts, &mapped) < 1e-10);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(align_similarity(&pts, &pts), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pose_mapping_preserves_projection() {
        // a device viewing source-frame points produces the same pixels after
        // mapping both the points and the pose through the similarity
        use crate::geom::{project, DeviceKind, DeviceView, Intrinsics, ViewId};
        let pts = cloud(20, 4);
        let rot = Rotation3::new(Vector3::new(-0.2, 0.33, 0.9));
        let t = Vector3::new(0.5, 1.5, -0.7);
        let s = 2.6;
        let sim = Similarity { scale: s, rotation: rot, translation: t };

        let pose = Pose::look_at(&Point3::new(3.0, 1.0, 2.0), &Point3::origin(), &Vector3::z()).unwrap();
        let view = DeviceView {
            id: ViewId(0),
            kind: DeviceKind::Camera,
            intrinsics: Intrinsics::centered(600.0, 640, 480).unwrap(),
            pose,
        };
        let mapped_view = DeviceView { pose: sim.apply_to_pose(&pose), ..view.clone() };
        for p in &pts {
            let (u1, v1) = project(&view, p).unwrap();
            let (u2, v2) = project(&mapped_view, &sim.apply(p)).unwrap();
            assert!((u1 - u2).abs() < 1e-8 && (v1 - v2).abs() < 1e-8);
        }
    }
}
