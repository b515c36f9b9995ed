//! Projective device model shared by cameras and projectors, plus the
//! geometric quantities the spectral stage needs: triangulation, point
//! normals, near-light shading, and mesh visibility.

mod mesh;
mod normals;
mod shading;
mod triangulate;
mod visibility;

pub use mesh::{point_triangle_distance_squared, RayCaster, RayHit, TriangleMesh};
pub use normals::{estimate_normals, KdTree};
pub use shading::shading_factor;
pub use triangulate::{reprojection_rms, triangulate};
pub use visibility::{visible, visible_pair_set};

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Point3, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Pinhole intrinsics. No distortion terms: the rigs this pipeline targets
/// are modeled distortion-free and extra parameters would be unobservable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::argument(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Symmetric intrinsics with the principal point at the image center.
    pub fn centered(f: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }
}

/// World→device rigid transform: `X_dev = R·X_world + t`. The device looks
/// down its +z axis, +x right, +y down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vector3::zeros() }
    }

    /// Validates orthonormality and det = +1 to 1e-9.
    pub fn from_matrix(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let rtr = rotation.transpose() * rotation;
        if (rtr - Matrix3::identity()).norm() > 1e-9 {
            return Err(Error::argument("rotation is not orthonormal".to_string()));
        }
        if (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::argument("rotation determinant is not +1".to_string()));
        }
        Ok(Self { rotation: Rotation3::from_matrix_unchecked(rotation), translation })
    }

    pub fn from_parts(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    /// Device center in world coordinates, `−Rᵀ·t`.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.inverse() * self.translation))
    }

    pub fn transform(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation * p.coords + self.translation
    }

    pub fn inverse_transform(&self, device_point: &Vector3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.inverse() * (device_point - self.translation))
    }

    /// Pose of a device at `eye` looking at `target`, roll fixed by `up`.
    pub fn look_at(eye: &Point3<f64>, target: &Point3<f64>, up: &Vector3<f64>) -> Result<Self> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::argument("look_at eye and target coincide".to_string()))?;
        let x = z
            .cross(up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Degenerate("view direction parallel to up vector".to_string()))?;
        let y = z.cross(&x);
        let rotation = Rotation3::from_matrix_unchecked(Matrix3::from_rows(&[
            x.transpose(),
            y.transpose(),
            z.transpose(),
        ]));
        let translation = -(rotation * eye.coords);
        Ok(Self { rotation, translation })
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&self.rotation)
    }

    /// Geodesic distance between the two rotations, in radians.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        (self.rotation.inverse() * other.rotation).angle()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Camera,
    Projector,
}

/// Identifier of one device placement (a camera or projector position).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ViewId(pub usize);

/// One registered device placement: a camera that captured images here, or a
/// projector that emitted patterns from here. Both project identically.
#[derive(Debug, Clone)]
pub struct DeviceView {
    pub id: ViewId,
    pub kind: DeviceKind,
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

impl DeviceView {
    pub fn center(&self) -> Point3<f64> {
        self.pose.center()
    }
}

/// Pinhole projection of a world point into a view.
///
/// Errors if the point has nonpositive depth in the device frame.
pub fn project(view: &DeviceView, p: &Point3<f64>) -> Result<(f64, f64)> {
    let d = view.pose.transform(p);
    if d.z <= 0.0 {
        return Err(Error::BehindCamera {
            kind: match view.kind {
                DeviceKind::Camera => "camera",
                DeviceKind::Projector => "projector",
            },
            depth: d.z,
        });
    }
    let k = &view.intrinsics;
    Ok((k.fx * d.x / d.z + k.cx, k.fy * d.y / d.z + k.cy))
}

/// A reconstructed surface point with its unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPoint {
    pub position: Point3<f64>,
    pub normal: Unit<Vector3<f64>>,
}
