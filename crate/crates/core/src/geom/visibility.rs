//! Point visibility against the scene mesh, the substitute for a
//! reconstructed occluder surface: a point participates in a projector-camera
//! pair only if both devices see it unobstructed.

use super::{project, shading_factor, DeviceKind, DeviceView, OrientedPoint, RayCaster};
use rayon::prelude::*;

/// Whether `point` is usable from `view`:
/// in front of the device and inside its image bounds, with the segment to
/// the device center unblocked by the mesh. Projectors additionally require
/// a positive shading factor (a back-facing point receives no light); cameras
/// tolerate grazing incidence.
pub fn visible(point: &OrientedPoint, view: &DeviceView, caster: &RayCaster, eps: f64) -> bool {
    let (u, v) = match project(view, &point.position) {
        Ok(uv) => uv,
        Err(_) => return false,
    };
    let k = &view.intrinsics;
    if u < 0.0 || u >= k.width as f64 || v < 0.0 || v >= k.height as f64 {
        return false;
    }
    if view.kind == DeviceKind::Projector {
        match shading_factor(&view.center(), &point.position, &point.normal) {
            Ok(s) if s > 0.0 => {}
            _ => return false,
        }
    }
    let origin = point.position + point.normal.as_ref() * eps;
    let dir = view.center() - origin;
    !caster.occluded(&origin, &dir, 1e-9, 1.0 - 1e-9)
}

/// For every point, the indices of `pairs` whose projector and camera both
/// see it. `|𝒱(k)|` is the length of each entry.
pub fn visible_pair_set(
    points: &[OrientedPoint],
    pairs: &[(&DeviceView, &DeviceView)],
    caster: &RayCaster,
    eps: f64,
) -> Vec<Vec<usize>> {
    points
        .par_iter()
        .map(|point| {
            pairs
                .iter()
                .enumerate()
                .filter(|(_, (projector, camera))| {
                    visible(point, projector, caster, eps) && visible(point, camera, caster, eps)
                })
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Intrinsics, Pose, TriangleMesh, ViewId};
    use nalgebra::{Point3, Unit, Vector3};

    fn axis_cube() -> TriangleMesh {
        // unit cube centered at origin
        let v = |x: f64, y: f64, z: f64| Point3::new(x * 0.5, y * 0.5, z * 0.5);
        let vertices = vec![
            v(-1.0, -1.0, -1.0),
            v(1.0, -1.0, -1.0),
            v(1.0, 1.0, -1.0),
            v(-1.0, 1.0, -1.0),
            v(-1.0, -1.0, 1.0),
            v(1.0, -1.0, 1.0),
            v(1.0, 1.0, 1.0),
            v(-1.0, 1.0, 1.0),
        ];
        let quads = [
            [0, 3, 2, 1], // z = -0.5
            [4, 5, 6, 7], // z = +0.5
            [0, 1, 5, 4], // y = -0.5
            [2, 3, 7, 6], // y = +0.5
            [1, 2, 6, 5], // x = +0.5
            [0, 4, 7, 3], // x = -0.5
        ];
        let mut triangles = Vec::new();
        for q in quads {
            triangles.push([q[0], q[1], q[2]]);
            triangles.push([q[0], q[2], q[3]]);
        }
        TriangleMesh::new(vertices, triangles).unwrap()
    }

    fn camera_at(id: usize, eye: Point3<f64>, kind: DeviceKind) -> DeviceView {
        DeviceView {
            id: ViewId(id),
            kind,
            intrinsics: Intrinsics::centered(500.0, 640, 480).unwrap(),
            pose: Pose::look_at(&eye, &Point3::origin(), &Vector3::z()).unwrap(),
        }
    }

    #[test]
    fn front_face_point_visible_from_front_camera() {
        let mesh = axis_cube();
        let caster = RayCaster::new(&mesh);
        let point = OrientedPoint {
            position: Point3::new(0.5, 0.0, 0.0),
            normal: Unit::new_normalize(Vector3::x()),
        };
        let front = camera_at(0, Point3::new(3.0, 0.0, 0.0), DeviceKind::Camera);
        assert!(visible(&point, &front, &caster, 1e-4));
    }

    #[test]
    fn same_point_hidden_from_behind() {
        let mesh = axis_cube();
        let caster = RayCaster::new(&mesh);
        let point = OrientedPoint {
            position: Point3::new(0.5, 0.0, 0.0),
            normal: Unit::new_normalize(Vector3::x()),
        };
        let behind = camera_at(1, Point3::new(-3.0, 0.0, 0.0), DeviceKind::Camera);
        assert!(!visible(&point, &behind, &caster, 1e-4));
    }

    #[test]
    fn projector_requires_front_facing() {
        let mesh = TriangleMesh::new(vec![Point3::origin(); 3], vec![]).unwrap();
        let caster = RayCaster::new(&mesh); // empty: nothing occludes
        let point = OrientedPoint {
            position: Point3::origin(),
            normal: Unit::new_normalize(-Vector3::x()), // faces away from the device
        };
        let proj = camera_at(0, Point3::new(3.0, 0.0, 0.0), DeviceKind::Projector);
        let cam = camera_at(1, Point3::new(3.0, 0.0, 0.0), DeviceKind::Camera);
        assert!(!visible(&point, &proj, &caster, 1e-4));
        assert!(visible(&point, &cam, &caster, 1e-4)); // grazing/back allowed for cameras
    }

    #[test]
    fn pair_set_is_the_conjunction_of_both_visibilities() {
        let mesh = axis_cube();
        let caster = RayCaster::new(&mesh);
        let points = vec![
            OrientedPoint {
                position: Point3::new(0.5, 0.0, 0.0),
                normal: Unit::new_normalize(Vector3::x()),
            },
            OrientedPoint {
                position: Point3::new(-0.5, 0.0, 0.0),
                normal: Unit::new_normalize(-Vector3::x()),
            },
        ];
        let proj = camera_at(0, Point3::new(3.0, 0.5, 0.2), DeviceKind::Projector);
        let cam_front = camera_at(1, Point3::new(3.0, -0.5, 0.2), DeviceKind::Camera);
        let cam_back = camera_at(2, Point3::new(-3.0, 0.0, 0.2), DeviceKind::Camera);
        let pairs = vec![(&proj, &cam_front), (&proj, &cam_back)];
        let vis = visible_pair_set(&points, &pairs, &caster, 1e-4);
        assert_eq!(vis[0], vec![0]); // +x point: projector + front camera only
        assert!(vis[1].is_empty()); // -x point: projector never sees it
    }
}
