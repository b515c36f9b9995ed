//! View registration against existing structure: RANSAC over a 6-point DLT
//! pose solver, then pose-only Gauss-Newton on the inliers.

use super::ReconstructionState;
use crate::error::{Error, Result};
use crate::geom::{project, DeviceView, Pose, ViewId};
use nalgebra::{DMatrix, Matrix3, Point3, Rotation3, Vector3, Vector6};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Debug, Clone, Copy)]
pub struct PnpOptions {
    pub ransac_threshold_px: f64,
    pub ransac_iterations: usize,
    pub seed: u64,
}

impl Default for PnpOptions {
    fn default() -> Self {
        Self { ransac_threshold_px: 2.0, ransac_iterations: 500, seed: 0 }
    }
}

/// Estimate the pose of `view_id` from its observations of already
/// triangulated tracks and mark it registered.
///
/// Needs at least 6 anchors (the linear pose solver's minimal set).
pub fn register_view(
    state: &mut ReconstructionState,
    view_id: ViewId,
    opts: &PnpOptions,
) -> Result<usize> {
    let anchors: Vec<(Point3<f64>, (f64, f64))> = state
        .tracks
        .iter()
        .filter_map(|t| {
            let p = t.point?;
            let obs = t.track.observation_in(view_id)?;
            Some((p, obs.position))
        })
        .collect();
    if anchors.len() < 6 {
        return Err(Error::Registration(format!(
            "view {} has {} anchors, need at least 6",
            view_id.0,
            anchors.len()
        )));
    }

    let template = state.view(view_id).view.clone();
    let k = template.intrinsics;
    let normalized: Vec<(Point3<f64>, (f64, f64))> = anchors
        .iter()
        .map(|(p, (u, v))| (*p, ((u - k.cx) / k.fx, (v - k.cy) / k.fy)))
        .collect();

    let mut rng = StdRng::seed_from_u64(opts.seed ^ view_id.0 as u64);
    let mut best: Option<(Pose, Vec<usize>)> = None;
    let mut needed = opts.ransac_iterations;
    let mut iter = 0;
    while iter < needed {
        iter += 1;
        let mut sample = [0usize; 6];
        for s in &mut sample {
            *s = rng.gen_range(0..anchors.len());
        }
        let subset: Vec<_> = sample.iter().map(|&i| normalized[i]).collect();
        let Some(pose) = dlt_pose(&subset) else {
            continue;
        };
        let view = DeviceView { pose, ..template.clone() };
        let inliers: Vec<usize> = anchors
            .iter()
            .enumerate()
            .filter(|(_, (p, (u, v)))| match project(&view, p) {
                Ok((pu, pv)) => (pu - u).hypot(pv - v) < opts.ransac_threshold_px,
                Err(_) => false,
            })
            .map(|(i, _)| i)
            .collect();
        if best.as_ref().map_or(true, |(_, b)| inliers.len() > b.len()) {
            let w = inliers.len() as f64 / anchors.len() as f64;
            best = Some((pose, inliers));
            let fail = (1.0 - w.powi(6)).max(1e-12);
            let n = (1.0 - 0.9999f64).ln() / fail.ln().min(-1e-12);
            needed = needed.min((n.ceil() as usize).max(10));
        }
    }

    let (pose, inliers) = best.ok_or_else(|| {
        Error::Registration(format!("PnP RANSAC failed for view {}", view_id.0))
    })?;
    if inliers.len() < 6 {
        return Err(Error::Registration(format!(
            "view {}: only {} PnP inliers",
            view_id.0,
            inliers.len()
        )));
    }

    let inlier_anchors: Vec<(Point3<f64>, (f64, f64))> =
        inliers.iter().map(|&i| anchors[i]).collect();
    let refined = refine_pose(pose, &template, &inlier_anchors);

    state.views[view_id.0].view.pose = refined;
    state.views[view_id.0].registered = true;
    Ok(inliers.len())
}

/// Linear pose from ≥6 points: solve the 11-dof system for [R|t] on
/// normalized image coordinates, then project onto SO(3).
fn dlt_pose(anchors: &[(Point3<f64>, (f64, f64))]) -> Option<Pose> {
    let mut a = DMatrix::zeros(2 * anchors.len(), 12);
    for (row, (p, (xn, yn))) in anchors.iter().enumerate() {
        let x = [p.x, p.y, p.z, 1.0];
        for c in 0..4 {
            a[(2 * row, c)] = x[c];
            a[(2 * row, 8 + c)] = -xn * x[c];
            a[(2 * row + 1, 4 + c)] = x[c];
            a[(2 * row + 1, 8 + c)] = -yn * x[c];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let min_idx = (0..svd.singular_values.len())
        .min_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap())?;
    let h = v_t.row(min_idx);
    let mut m = Matrix3::new(h[0], h[1], h[2], h[4], h[5], h[6], h[8], h[9], h[10]);
    let mut t = Vector3::new(h[3], h[7], h[11]);

    // fix the sign so points land in front
    let mut in_front = 0;
    for (p, _) in anchors {
        if (m.row(2) * p.coords)[0] + t.z > 0.0 {
            in_front += 1;
        }
    }
    if in_front * 2 < anchors.len() {
        m = -m;
        t = -t;
    }

    // nearest rotation and consistent scale
    let svd3 = m.svd(true, true);
    let (u, v_t3) = (svd3.u?, svd3.v_t?);
    let det = (u * v_t3).determinant();
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    let r = u * d * v_t3;
    let scale = (svd3.singular_values[0] + svd3.singular_values[1] + svd3.singular_values[2]) / 3.0;
    if scale < 1e-12 {
        return None;
    }
    Some(Pose::from_parts(Rotation3::from_matrix_unchecked(r), t / scale))
}

/// Pose-only Gauss-Newton over the reprojection residuals.
fn refine_pose(mut pose: Pose, template: &DeviceView, anchors: &[(Point3<f64>, (f64, f64))]) -> Pose {
    let k = template.intrinsics;
    for _ in 0..30 {
        let mut h = nalgebra::Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        let mut count = 0;
        for (p, (u, v)) in anchors {
            let d = pose.transform(p);
            if d.z <= 1e-9 {
                continue;
            }
            count += 1;
            let (x, y, z) = (d.x, d.y, d.z);
            let ru = k.fx * x / z + k.cx - u;
            let rv = k.fy * y / z + k.cy - v;
            // du/d(device point)
            let ju = Vector3::new(k.fx / z, 0.0, -k.fx * x / (z * z));
            let jv = Vector3::new(0.0, k.fy / z, -k.fy * y / (z * z));
            // increment model d(δ) = Exp(δω)·(R p) + t + δt,
            // so ∂d/∂δω = −[R p]ˣ and the stacked row transposes to [R p]ˣ·j
            let rp = d - pose.translation;
            let skew = Matrix3::new(0.0, -rp.z, rp.y, rp.z, 0.0, -rp.x, -rp.y, rp.x, 0.0);
            let ju_pose = Vector6::from_iterator((skew * ju).iter().chain(ju.iter()).copied());
            let jv_pose = Vector6::from_iterator((skew * jv).iter().chain(jv.iter()).copied());
            h += ju_pose * ju_pose.transpose() + jv_pose * jv_pose.transpose();
            g += ju_pose * ru + jv_pose * rv;
        }
        if count < 6 {
            break;
        }
        let Some(step) = h.lu().solve(&g) else {
            break;
        };
        let dw = Vector3::new(step[0], step[1], step[2]);
        let dt = Vector3::new(step[3], step[4], step[5]);
        pose = Pose::from_parts(Rotation3::new(-dw) * pose.rotation, pose.translation - dt);
        if step.norm() < 1e-14 {
            break;
        }
    }
    pose
}
