//! Pure perturbation helpers for robustness sweeps.

use super::gaussian_field_noise;
use crate::error::{Error, Result};
use crate::geom::{DeviceView, Pose};
use crate::img::GrayImage;
use nalgebra::{Rotation3, Vector3};

/// Additive Gaussian pixel noise with a counter-based generator: the same
/// (σ, seed) always produces the same images, and σ = 0 is the identity.
pub fn perturb_images(images: &[GrayImage], sigma: f64, seed: u64) -> Result<Vec<GrayImage>> {
    if sigma < 0.0 {
        return Err(Error::argument(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(images.to_vec());
    }
    Ok(images
        .iter()
        .enumerate()
        .map(|(f, img)| {
            let mut out = img.clone();
            for (i, v) in out.data.iter_mut().enumerate() {
                *v += sigma as f32 * gaussian_field_noise(seed, f as u64, i as u64) as f32;
            }
            out
        })
        .collect())
}

/// Jitter poses: rotation by a random axis scaled to `rot_sigma` radians,
/// translation by `trans_sigma` per axis.
pub fn perturb_poses(
    views: &[DeviceView],
    rot_sigma: f64,
    trans_sigma: f64,
    seed: u64,
) -> Result<Vec<DeviceView>> {
    if rot_sigma < 0.0 || trans_sigma < 0.0 {
        return Err(Error::argument("pose jitter sigmas must be >= 0".to_string()));
    }
    Ok(views
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let g = |s: u64| gaussian_field_noise(seed, i as u64, s);
            let axis = Vector3::new(g(0), g(1), g(2));
            let rot = if rot_sigma > 0.0 && axis.norm() > 1e-12 {
                Rotation3::new(axis.normalize() * rot_sigma * g(3))
            } else {
                Rotation3::identity()
            };
            let dt = Vector3::new(g(4), g(5), g(6)) * trans_sigma;
            DeviceView {
                pose: Pose::from_parts(rot * v.pose.rotation, v.pose.translation + dt),
                ..v.clone()
            }
        })
        .collect())
}
