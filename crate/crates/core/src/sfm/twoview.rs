//! Two-view bootstrap: essential matrix by normalized 8-point inside RANSAC,
//! pose decomposition with a cheirality vote, unit-baseline gauge.

use super::ReconstructionState;
use crate::error::{Error, Result};
use crate::geom::{triangulate, DeviceView, Pose, ViewId};
use nalgebra::{Matrix3, Point2, Rotation3, Vector3};
#[cfg(test)]
use {
    super::{FeatureTrack, TrackState, ViewState},
    nalgebra::Point3,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Debug, Clone, Copy)]
pub struct TwoViewOptions {
    pub ransac_threshold_px: f64,
    pub ransac_iterations: usize,
    pub seed: u64,
    /// Reprojection gate for keeping bootstrap triangulations.
    pub reprojection_gate_px: f64,
}

impl Default for TwoViewOptions {
    fn default() -> Self {
        Self { ransac_threshold_px: 1.0, ransac_iterations: 2000, seed: 0, reprojection_gate_px: 2.0 }
    }
}

/// Relative pose and initial structure from two views' shared tracks.
///
/// View `a` is placed at its current pose in `state` (identity for a fresh
/// state); view `b` receives the decomposed relative pose with the baseline
/// scaled to 1. Inlier tracks are triangulated and gated.
pub fn initialize_pair(
    state: &mut ReconstructionState,
    view_a: ViewId,
    view_b: ViewId,
    opts: &TwoViewOptions,
) -> Result<usize> {
    if view_a == view_b {
        return Err(Error::Initialization("cannot initialize a view against itself".to_string()));
    }
    let shared: Vec<(usize, (f64, f64), (f64, f64))> = state
        .tracks
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            let oa = t.track.observation_in(view_a)?;
            let ob = t.track.observation_in(view_b)?;
            Some((i, oa.position, ob.position))
        })
        .collect();
    if shared.len() < 8 {
        return Err(Error::Initialization(format!(
            "views share {} tracks, need at least 8",
            shared.len()
        )));
    }

    let ka = state.view(view_a).view.intrinsics;
    let kb = state.view(view_b).view.intrinsics;
    let norm_a: Vec<Point2<f64>> = shared
        .iter()
        .map(|(_, pa, _)| Point2::new((pa.0 - ka.cx) / ka.fx, (pa.1 - ka.cy) / ka.fy))
        .collect();
    let norm_b: Vec<Point2<f64>> = shared
        .iter()
        .map(|(_, _, pb)| Point2::new((pb.0 - kb.cx) / kb.fx, (pb.1 - kb.cy) / kb.fy))
        .collect();

    // RANSAC over essential matrices; the Sampson gate converts the pixel
    // threshold into normalized units with the mean focal length
    let f_mean = 0.25 * (ka.fx + ka.fy + kb.fx + kb.fy);
    let threshold = opts.ransac_threshold_px / f_mean;
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let mut best: Option<(Matrix3<f64>, Vec<bool>, usize)> = None;
    let mut needed = opts.ransac_iterations;
    let mut iter = 0;
    while iter < needed {
        iter += 1;
        let mut sample = [0usize; 8];
        for s in &mut sample {
            *s = rng.gen_range(0..shared.len());
        }
        let Some(e) = eight_point(&sample.map(|i| (norm_a[i], norm_b[i]))) else {
            continue;
        };
        let mut inliers = vec![false; shared.len()];
        let mut count = 0;
        for i in 0..shared.len() {
            if sampson_distance(&e, &norm_a[i], &norm_b[i]) < threshold {
                inliers[i] = true;
                count += 1;
            }
        }
        if best.as_ref().map_or(true, |(_, _, c)| count > *c) {
            best = Some((e, inliers, count));
            // adaptive termination at 99.99% confidence
            let w = count as f64 / shared.len() as f64;
            let fail = (1.0 - w.powi(8)).max(1e-12);
            let n = (1.0 - 0.9999f64).ln() / fail.ln().min(-1e-12);
            needed = needed.min((n.ceil() as usize).max(10));
        }
    }
    let (mut e, mut inliers, mut inlier_count) =
        best.ok_or_else(|| Error::Initialization("RANSAC found no essential matrix".to_string()))?;
    if inlier_count < 8 {
        return Err(Error::Initialization(format!("only {inlier_count} inliers")));
    }

    // decompose; vote by cheirality over the inliers
    let pose_a = state.view(view_a).view.pose;
    let candidates = decompose_essential(&e);
    let mut best_rel: Option<(Pose, usize)> = None;
    for rel in &candidates {
        // world pose of b: X_b = R_rel · X_a + t_rel with X_a = R_a X + t_a
        let pose_b = compose_relative(&pose_a, rel);
        let mut good = 0;
        for (i, &(_, pa, pb)) in shared.iter().enumerate() {
            if !inliers[i] {
                continue;
            }
            let va = make_view(&state.view(view_a).view, pose_a);
            let vb = make_view(&state.view(view_b).view, pose_b);
            if let Ok(p) = triangulate(&[(&va, pa), (&vb, pb)]) {
                let da = pose_a.transform(&p).z;
                let db = pose_b.transform(&p).z;
                if da > 0.0 && db > 0.0 {
                    good += 1;
                }
            }
        }
        if best_rel.as_ref().map_or(true, |(_, g)| good > *g) {
            best_rel = Some((*rel, good));
        }
    }
    let (mut rel, good) = best_rel.unwrap();
    if good < inlier_count / 2 || good < 5 {
        return Err(Error::Initialization(format!(
            "cheirality check failed ({good}/{inlier_count} points in front): degenerate or zero baseline"
        )));
    }

    // refine (R, t) on the essential manifold over the Sampson cost, then
    // re-expand the consensus set and refine once more: a projected linear
    // fit alone lands measurably off the geometric optimum
    for _ in 0..2 {
        let inlier_pairs: Vec<(Point2<f64>, Point2<f64>)> = (0..shared.len())
            .filter(|&i| inliers[i])
            .map(|i| (norm_a[i], norm_b[i]))
            .collect();
        rel = refine_relative_pose(rel, &inlier_pairs);
        e = essential_from_relative(&rel);
        let mut count = 0;
        for i in 0..shared.len() {
            inliers[i] = sampson_distance(&e, &norm_a[i], &norm_b[i]) < threshold;
            if inliers[i] {
                count += 1;
            }
        }
        if count <= inlier_count {
            break;
        }
        inlier_count = count;
    }
    let pose_b = compose_relative(&pose_a, &rel);

    state.views[view_b.0].view.pose = pose_b;
    state.views[view_a.0].registered = true;
    state.views[view_b.0].registered = true;

    // triangulate the inlier tracks through the reprojection gate
    let mut kept = 0;
    for (i, &(track_idx, pa, pb)) in shared.iter().enumerate() {
        if !inliers[i] {
            continue;
        }
        let va = make_view(&state.view(view_a).view, pose_a);
        let vb = make_view(&state.view(view_b).view, pose_b);
        if let Ok(p) = triangulate(&[(&va, pa), (&vb, pb)]) {
            let in_front = pose_a.transform(&p).z > 0.0 && pose_b.transform(&p).z > 0.0;
            let rms = crate::geom::reprojection_rms(&p, &[(&va, pa), (&vb, pb)]);
            if in_front && rms < opts.reprojection_gate_px {
                state.tracks[track_idx].point = Some(p);
                kept += 1;
            }
        }
    }
    if kept < 8 {
        return Err(Error::Initialization(format!("only {kept} triangulated points survived gating")));
    }
    Ok(kept)
}

fn make_view(template: &DeviceView, pose: Pose) -> DeviceView {
    DeviceView { pose, ..template.clone() }
}

/// World pose of the second view given the first and the relative transform
/// (in the first view's device frame).
fn compose_relative(pose_a: &Pose, rel: &Pose) -> Pose {
    // X_b = R_rel (R_a X + t_a) + t_rel
    Pose::from_parts(rel.rotation * pose_a.rotation, rel.rotation * pose_a.translation + rel.translation)
}

/// Least-squares essential matrix from ≥8 normalized correspondences, with
/// Hartley conditioning and the (σ,σ,0) singular-value projection.
pub fn eight_point(pairs: &[(Point2<f64>, Point2<f64>)]) -> Option<Matrix3<f64>> {
    eight_point_weighted(pairs, None)
}

/// Row-weighted variant; with Sampson weights this minimizes the first-order
/// geometric error instead of the raw algebraic one.
pub fn eight_point_weighted(
    pairs: &[(Point2<f64>, Point2<f64>)],
    weights: Option<&[f64]>,
) -> Option<Matrix3<f64>> {
    if pairs.len() < 8 {
        return None;
    }
    let (ta, a_pts) = condition(pairs.iter().map(|p| p.0));
    let (tb, b_pts) = condition(pairs.iter().map(|p| p.1));

    // null vector of the constraint matrix via the 9×9 normal matrix (a thin
    // SVD of the minimal 8×9 system would not return the null direction)
    let mut ata = nalgebra::SMatrix::<f64, 9, 9>::zeros();
    for (i, (pa, pb)) in a_pts.iter().zip(&b_pts).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let (x1, y1) = (pa.x, pa.y);
        let (x2, y2) = (pb.x, pb.y);
        // x2ᵀ E x1 = 0
        let row = nalgebra::SVector::<f64, 9>::from_column_slice(&[
            x2 * x1,
            x2 * y1,
            x2,
            y2 * x1,
            y2 * y1,
            y2,
            x1,
            y1,
            1.0,
        ]);
        ata += w * row * row.transpose();
    }
    let eig = ata.symmetric_eigen();
    let min_idx = (0..9).min_by(|&i, &j| {
        eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap()
    })?;
    let h = eig.eigenvectors.column(min_idx);
    let e_cond = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    // undo conditioning and project onto the essential manifold
    let e = tb.transpose() * e_cond * ta;
    let svd3 = e.svd(true, true);
    let (u, v_t3) = (svd3.u?, svd3.v_t?);
    let s = (svd3.singular_values[0] + svd3.singular_values[1]) * 0.5;
    Some(u * Matrix3::from_diagonal(&Vector3::new(s, s, 0.0)) * v_t3)
}

/// Isotropic conditioning: centroid to origin, mean distance √2.
fn condition(points: impl Iterator<Item = Point2<f64>>) -> (Matrix3<f64>, Vec<Point2<f64>>) {
    let pts: Vec<Point2<f64>> = points.collect();
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_d = pts.iter().map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt()).sum::<f64>() / n;
    let s = if mean_d > 1e-12 { std::f64::consts::SQRT_2 / mean_d } else { 1.0 };
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let out = pts.iter().map(|p| Point2::new(s * (p.x - cx), s * (p.y - cy))).collect();
    (t, out)
}

fn skew3(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn essential_from_relative(rel: &Pose) -> Matrix3<f64> {
    skew3(&rel.translation.normalize()) * rel.rotation.matrix()
}

fn tangent_basis(t: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if t.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let b1 = t.cross(&helper).normalize();
    let b2 = t.cross(&b1);
    (b1, b2)
}

fn sampson_signed(e: &Matrix3<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let xa = Vector3::new(a.x, a.y, 1.0);
    let xb = Vector3::new(b.x, b.y, 1.0);
    let ex1 = e * xa;
    let etx2 = e.transpose() * xb;
    let num = xb.dot(&ex1);
    let den = ex1.x * ex1.x + ex1.y * ex1.y + etx2.x * etx2.x + etx2.y * etx2.y;
    if den <= 1e-300 {
        return 0.0;
    }
    num / den.sqrt()
}

/// Gauss-Newton on the essential manifold: 3 rotation parameters plus 2 for
/// the translation direction, minimizing the summed squared Sampson
/// distances. Central-difference Jacobian; the problem is tiny.
fn refine_relative_pose(mut rel: Pose, pairs: &[(Point2<f64>, Point2<f64>)]) -> Pose {
    if pairs.len() < 5 {
        return rel;
    }
    rel.translation = rel.translation.normalize();
    for _ in 0..20 {
        let t = rel.translation;
        let (b1, b2) = tangent_basis(&t);
        let eval = |p: &[f64; 5]| -> Vec<f64> {
            let rot = Rotation3::new(Vector3::new(p[0], p[1], p[2])) * rel.rotation;
            let tt = (t + b1 * p[3] + b2 * p[4]).normalize();
            let e = skew3(&tt) * rot.matrix();
            pairs.iter().map(|(a, b)| sampson_signed(&e, a, b)).collect()
        };
        let r0 = eval(&[0.0; 5]);
        let h = 1e-7;
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(5);
        for c in 0..5 {
            let mut p = [0.0; 5];
            p[c] = h;
            let rp = eval(&p);
            p[c] = -h;
            let rm = eval(&p);
            cols.push(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
        }
        let mut jtj = nalgebra::SMatrix::<f64, 5, 5>::zeros();
        let mut jtr = nalgebra::SVector::<f64, 5>::zeros();
        for i in 0..pairs.len() {
            let ji = nalgebra::SVector::<f64, 5>::from_fn(|c, _| cols[c][i]);
            jtj += ji * ji.transpose();
            jtr += ji * r0[i];
        }
        for d in 0..5 {
            jtj[(d, d)] += 1e-14 + 1e-9 * jtj[(d, d)];
        }
        let Some(step) = jtj.lu().solve(&jtr) else { break };
        rel = Pose::from_parts(
            Rotation3::new(-Vector3::new(step[0], step[1], step[2])) * rel.rotation,
            (t - b1 * step[3] - b2 * step[4]).normalize(),
        );
        if step.norm() < 1e-14 {
            break;
        }
    }
    rel
}

pub fn sampson_distance(e: &Matrix3<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let xa = Vector3::new(a.x, a.y, 1.0);
    let xb = Vector3::new(b.x, b.y, 1.0);
    let ex1 = e * xa;
    let etx2 = e.transpose() * xb;
    let num = xb.dot(&ex1);
    let den = ex1.x * ex1.x + ex1.y * ex1.y + etx2.x * etx2.x + etx2.y * etx2.y;
    if den <= 0.0 {
        return f64::INFINITY;
    }
    (num * num / den).sqrt()
}

/// The four (R, t) candidates of an essential matrix, t scaled to unit norm.
fn decompose_essential(e: &Matrix3<f64>) -> Vec<Pose> {
    let svd = e.svd(true, true);
    let (Some(mut u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Vec::new();
    };
    let mut v = v_t.transpose();
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    if v.determinant() < 0.0 {
        v.column_mut(2).neg_mut();
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * v.transpose();
    let r2 = u * w.transpose() * v.transpose();
    let t: Vector3<f64> = u.column(2).into();
    let mut out = Vec::new();
    for r in [r1, r2] {
        let rot = Rotation3::from_matrix_unchecked(r);
        for sign in [1.0, -1.0] {
            out.push(Pose::from_parts(rot, sign * t));
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geom::{DeviceKind, Intrinsics, project};
    use crate::sfm::{Observation, ObservationSource};
    use std::collections::BTreeSet;

    pub fn state_from_points(
        views: Vec<DeviceView>,
        true_views: &[DeviceView],
        points: &[Point3<f64>],
    ) -> ReconstructionState {
        let tracks = points
            .iter()
            .enumerate()
            .map(|(id, p)| {
                let observations = true_views
                    .iter()
                    .filter_map(|v| {
                        let (u, w) = project(v, p).ok()?;
                        if u < 0.0
                            || u >= v.intrinsics.width as f64
                            || w < 0.0
                            || w >= v.intrinsics.height as f64
                        {
                            return None;
                        }
                        Some(Observation {
                            view: v.id,
                            position: (u, w),
                            source: match v.kind {
                                DeviceKind::Camera => ObservationSource::CameraDecoded,
                                DeviceKind::Projector => ObservationSource::ProjectorNative,
                            },
                        })
                    })
                    .collect::<Vec<_>>();
                TrackState {
                    track: FeatureTrack { id, observations, projectors: BTreeSet::new() },
                    point: None,
                }
            })
            .filter(|t| t.track.observations.len() >= 2)
            .collect();
        ReconstructionState {
            views: views.into_iter().map(|view| ViewState { view, registered: false }).collect(),
            tracks,
        }
    }

    pub fn ring_views(n: usize, radius: f64, elevation: f64) -> Vec<DeviceView> {
        (0..n)
            .map(|i| {
                let a = i as f64 * 2.2 * std::f64::consts::PI / 8.0 + 0.3;
                let eye = Point3::new(radius * a.cos(), radius * a.sin(), elevation);
                DeviceView {
                    id: ViewId(i),
                    kind: DeviceKind::Camera,
                    intrinsics: Intrinsics::centered(700.0, 800, 600).unwrap(),
                    pose: Pose::look_at(&eye, &Point3::origin(), &Vector3::z()).unwrap(),
                }
            })
            .collect()
    }

    pub fn random_cloud(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.3..0.3),
                )
            })
            .collect()
    }

    /// Unregistered copies of ground-truth views (pose reset to identity).
    pub fn unposed(views: &[DeviceView]) -> Vec<DeviceView> {
        views
            .iter()
            .map(|v| DeviceView { pose: Pose::identity(), ..v.clone() })
            .collect()
    }

    #[test]
    fn noiseless_pair_recovers_relative_pose() {
        let true_views = ring_views(2, 2.0, 0.8);
        let points = random_cloud(300, 4);
        let mut state = state_from_points(unposed(&true_views), &true_views, &points);
        initialize_pair(&mut state, ViewId(0), ViewId(1), &TwoViewOptions::default()).unwrap();

        // compare relative rotation and translation direction
        let true_rel_r =
            true_views[1].pose.rotation * true_views[0].pose.rotation.inverse();
        let est_rel_r =
            state.views[1].view.pose.rotation * state.views[0].view.pose.rotation.inverse();
        let rot_err = (true_rel_r.inverse() * est_rel_r).angle();
        assert!(rot_err < 1e-6, "rotation error {rot_err}");

        let true_rel_t =
            (true_views[1].pose.translation - true_rel_r * true_views[0].pose.translation).normalize();
        let est_rel_t =
            (state.views[1].view.pose.translation - est_rel_r * state.views[0].view.pose.translation).normalize();
        let dir_err = (true_rel_t - est_rel_t).norm().min((true_rel_t + est_rel_t).norm());
        assert!(dir_err < 1e-6, "translation direction error {dir_err}");

        // baseline is normalized to one
        let baseline =
            (state.views[1].view.pose.center() - state.views[0].view.pose.center()).norm();
        assert!((baseline - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_view_twice_fails_initialization() {
        let true_views = ring_views(2, 2.0, 0.8);
        // both tracks observe via view 0 only, duplicated as view 1
        let dup = vec![true_views[0].clone(), {
            let mut v = true_views[0].clone();
            v.id = ViewId(1);
            v
        }];
        let points = random_cloud(100, 6);
        let mut state = state_from_points(unposed(&dup), &dup, &points);
        let res = initialize_pair(&mut state, ViewId(0), ViewId(1), &TwoViewOptions::default());
        assert!(res.is_err(), "zero-baseline pair must not initialize");
    }

    #[test]
    fn noisy_pair_keeps_high_inlier_fraction() {
        let true_views = ring_views(2, 2.0, 0.8);
        let points = random_cloud(500, 8);
        let mut state = state_from_points(unposed(&true_views), &true_views, &points);
        // σ = 0.3 px noise on every observation
        let mut rng = StdRng::seed_from_u64(42);
        for t in &mut state.tracks {
            for o in &mut t.track.observations {
                o.position.0 += 0.3 * normal(&mut rng);
                o.position.1 += 0.3 * normal(&mut rng);
            }
        }
        let total = state.tracks.len();
        let kept =
            initialize_pair(&mut state, ViewId(0), ViewId(1), &TwoViewOptions::default()).unwrap();
        assert!(
            kept as f64 > 0.95 * total as f64,
            "inliers {kept}/{total} below 95%"
        );
    }

    fn normal(rng: &mut StdRng) -> f64 {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
