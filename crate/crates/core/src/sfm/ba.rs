//! Weighted bundle adjustment.
//!
//! Minimizes `Σᵢ Σₖ wᵢ ‖xₖᵢ − πᵢ(pₖ)‖²` over registered poses, points, and
//! optionally one focal length per device class, with `wᵢ = 1` for cameras
//! and `w_p` for projectors (projector features are pattern pixel centers and
//! carry essentially no measurement noise, so they get a stiffer spring).
//!
//! Levenberg-Marquardt with the point blocks eliminated by a Schur
//! complement; all reductions run in fixed track order so the cost is
//! bit-reproducible.

use super::ReconstructionState;
use crate::error::{Error, Result};
use crate::geom::{DeviceKind, Pose};
use nalgebra::{
    DMatrix, DVector, Matrix2x3, Matrix2x6, Matrix3, Matrix6x3, Point3, Rotation3,
    Vector2, Vector3, Vector6,
};

#[derive(Debug, Clone, Copy)]
pub struct BaOptions {
    pub w_p: f64,
    pub refine_intrinsics: bool,
    /// Huber scale in pixels; `None` = plain squared error.
    pub huber_px: Option<f64>,
    pub max_iterations: usize,
    /// Stop when the relative cost decrease of an accepted step falls below
    /// this.
    pub relative_decrease: f64,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self {
            w_p: 100.0,
            refine_intrinsics: true,
            huber_px: None,
            max_iterations: 200,
            relative_decrease: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    /// Objective after every accepted step, starting at the initial cost.
    /// Non-increasing by construction; tests assert it.
    pub accepted_costs: Vec<f64>,
}

/// Plain Eq-style weighted reprojection cost of the current state.
pub fn weighted_cost(state: &ReconstructionState, w_p: f64) -> f64 {
    let mut cost = 0.0;
    for t in &state.tracks {
        let Some(p) = t.point else { continue };
        for o in &t.track.observations {
            let vs = state.view(o.view);
            if !vs.registered {
                continue;
            }
            let w = ReconstructionState::weight(vs.view.kind, w_p);
            let d = vs.view.pose.transform(&p);
            if d.z <= 0.0 {
                cost += 1e12; // unprojectable configuration
                continue;
            }
            let k = &vs.view.intrinsics;
            let du = k.fx * d.x / d.z + k.cx - o.position.0;
            let dv = k.fy * d.y / d.z + k.cy - o.position.1;
            cost += w * (du * du + dv * dv);
        }
    }
    cost
}

/// Pose retraction used by the solver: `R ← Exp(δω)·R`, `t ← t + δt`.
/// Public so derivative checks can perturb through the same map.
pub fn apply_pose_increment(pose: &Pose, delta: &Vector6<f64>) -> Pose {
    let dw = Vector3::new(delta[0], delta[1], delta[2]);
    let dt = Vector3::new(delta[3], delta[4], delta[5]);
    Pose::from_parts(Rotation3::new(dw) * pose.rotation, pose.translation + dt)
}

/// Residual and Jacobian blocks of one observation at the current linearization
/// point, all scaled by `sqrt(w)`.
///
/// Returns `None` if the point has nonpositive depth. Jacobian columns follow
/// [`apply_pose_increment`] for the pose and plain addition for the point and
/// the focal length.
#[allow(clippy::type_complexity)]
pub fn projection_blocks(
    pose: &Pose,
    intrinsics: &crate::geom::Intrinsics,
    point: &Point3<f64>,
    obs: (f64, f64),
    weight: f64,
) -> Option<(Vector2<f64>, Matrix2x6<f64>, Matrix2x3<f64>, Vector2<f64>)> {
    let d = pose.transform(point);
    if d.z <= 1e-12 {
        return None;
    }
    let k = intrinsics;
    let sw = weight.sqrt();
    let (x, y, z) = (d.x, d.y, d.z);
    let r = Vector2::new(
        sw * (k.fx * x / z + k.cx - obs.0),
        sw * (k.fy * y / z + k.cy - obs.1),
    );

    // ∂π/∂d
    let jpi = Matrix2x3::new(
        k.fx / z, 0.0, -k.fx * x / (z * z),
        0.0, k.fy / z, -k.fy * y / (z * z),
    ) * sw;

    // ∂d/∂δω = −[R p]ˣ, ∂d/∂δt = I
    let rp = d - pose.translation;
    let skew = Matrix3::new(0.0, -rp.z, rp.y, rp.z, 0.0, -rp.x, -rp.y, rp.x, 0.0);
    let j_rot = jpi * (-skew);
    let mut j_pose = Matrix2x6::zeros();
    j_pose.fixed_view_mut::<2, 3>(0, 0).copy_from(&j_rot);
    j_pose.fixed_view_mut::<2, 3>(0, 3).copy_from(&jpi);

    // ∂d/∂p = R
    let j_point = jpi * pose.rotation.matrix();

    // shared focal: u = f·x/z + cx, v = f·y/z + cy
    let j_focal = Vector2::new(sw * x / z, sw * y / z);

    Some((r, j_pose, j_point, j_focal))
}

struct Layout {
    /// view index -> column offset of its 6-wide block, `None` if fixed or
    /// unregistered
    view_block: Vec<Option<usize>>,
    /// focal class -> column offset (camera, projector)
    focal_col: [Option<usize>; 2],
    n_cols: usize,
    /// track index -> point slot
    point_slot: Vec<Option<usize>>,
    n_points: usize,
}

fn focal_class(kind: DeviceKind) -> usize {
    match kind {
        DeviceKind::Camera => 0,
        DeviceKind::Projector => 1,
    }
}

fn build_layout(state: &ReconstructionState, refine_intrinsics: bool) -> Layout {
    let fixed = state.views.iter().position(|v| v.registered);
    let mut view_block = vec![None; state.views.len()];
    let mut n_cols = 0;
    for (i, v) in state.views.iter().enumerate() {
        if v.registered && Some(i) != fixed {
            view_block[i] = Some(n_cols);
            n_cols += 6;
        }
    }
    let mut focal_col = [None, None];
    if refine_intrinsics {
        for class in 0..2 {
            let present = state
                .views
                .iter()
                .any(|v| v.registered && focal_class(v.view.kind) == class);
            if present {
                focal_col[class] = Some(n_cols);
                n_cols += 1;
            }
        }
    }
    let mut point_slot = vec![None; state.tracks.len()];
    let mut n_points = 0;
    for (i, t) in state.tracks.iter().enumerate() {
        if t.point.is_none() {
            continue;
        }
        let registered_obs = t
            .track
            .observations
            .iter()
            .filter(|o| state.view(o.view).registered)
            .count();
        if registered_obs >= 2 {
            point_slot[i] = Some(n_points);
            n_points += 1;
        }
    }
    Layout { view_block, focal_col, n_cols, point_slot, n_points }
}

/// Per-track normal-equation fragments.
struct TrackSystem {
    hpp: Matrix3<f64>,
    gp: Vector3<f64>,
    /// (column offset, W block) for 6-wide view blocks
    w_view: Vec<(usize, Matrix6x3<f64>)>,
    /// (column offset, W row) for focal columns
    w_focal: Vec<(usize, Vector3<f64>)>,
}

fn robust_weight(huber_px: Option<f64>, r: &Vector2<f64>) -> f64 {
    match huber_px {
        None => 1.0,
        Some(delta) => {
            let e = r.norm();
            if e <= delta {
                1.0
            } else {
                delta / e
            }
        }
    }
}

fn robust_cost(huber_px: Option<f64>, sq: f64) -> f64 {
    match huber_px {
        None => sq,
        Some(delta) => {
            let e = sq.sqrt();
            if e <= delta {
                sq
            } else {
                2.0 * delta * e - delta * delta
            }
        }
    }
}

/// Optimization objective (robustified when Huber is on).
fn objective(state: &ReconstructionState, opts: &BaOptions) -> f64 {
    let mut cost = 0.0;
    for t in &state.tracks {
        let Some(p) = t.point else { continue };
        for o in &t.track.observations {
            let vs = state.view(o.view);
            if !vs.registered {
                continue;
            }
            let w = ReconstructionState::weight(vs.view.kind, opts.w_p);
            let d = vs.view.pose.transform(&p);
            if d.z <= 0.0 {
                cost += 1e12;
                continue;
            }
            let k = &vs.view.intrinsics;
            let du = k.fx * d.x / d.z + k.cx - o.position.0;
            let dv = k.fy * d.y / d.z + k.cy - o.position.1;
            cost += w * robust_cost(opts.huber_px, du * du + dv * dv);
        }
    }
    cost
}

/// Levenberg-Marquardt refinement of every registered pose, every point with
/// two or more registered observations, and (optionally) one focal length per
/// device class. The first registered view anchors the gauge.
///
/// The objective never increases across accepted steps. Returns an
/// optimization error if no decreasing step exists while the gradient is
/// still large; the state keeps the last accepted (stable) values.
pub fn bundle_adjust(state: &mut ReconstructionState, opts: &BaOptions) -> Result<BaReport> {
    if state.registered_count() < 2 {
        return Err(Error::argument("bundle adjustment needs at least 2 registered views".to_string()));
    }
    if opts.w_p < 1.0 {
        return Err(Error::argument(format!("w_p must be >= 1, got {}", opts.w_p)));
    }

    let layout = build_layout(state, opts.refine_intrinsics);
    let mut cost = objective(state, opts);
    let initial_cost = cost;
    let mut accepted_costs = vec![cost];
    let mut lambda = 1e-6;
    let mut nu = 2.0;
    let mut iterations = 0;

    for _ in 0..opts.max_iterations {
        iterations += 1;

        // ---- linearize at the current state -------------------------------
        let mut hcc = DMatrix::<f64>::zeros(layout.n_cols, layout.n_cols);
        let mut gc = DVector::<f64>::zeros(layout.n_cols);
        let mut tracks_sys: Vec<(usize, TrackSystem)> = Vec::with_capacity(layout.n_points);
        let mut max_grad: f64 = 0.0;

        for (ti, t) in state.tracks.iter().enumerate() {
            let Some(slot) = layout.point_slot[ti] else { continue };
            let _ = slot;
            let p = t.point.unwrap();
            let mut sys = TrackSystem {
                hpp: Matrix3::zeros(),
                gp: Vector3::zeros(),
                w_view: Vec::new(),
                w_focal: Vec::new(),
            };
            for o in &t.track.observations {
                let vs = state.view(o.view);
                if !vs.registered {
                    continue;
                }
                let w = ReconstructionState::weight(vs.view.kind, opts.w_p);
                let Some((r, j_pose, j_point, j_focal)) =
                    projection_blocks(&vs.view.pose, &vs.view.intrinsics, &p, o.position, w)
                else {
                    continue;
                };
                let rw = robust_weight(opts.huber_px, &r);
                let (r, j_pose, j_point, j_focal) =
                    (r * rw.sqrt(), j_pose * rw.sqrt(), j_point * rw.sqrt(), j_focal * rw.sqrt());

                sys.hpp += j_point.transpose() * j_point;
                sys.gp += j_point.transpose() * r;

                if let Some(col) = layout.view_block[o.view.0] {
                    let block = j_pose.transpose() * j_pose;
                    for i in 0..6 {
                        for j in 0..6 {
                            hcc[(col + i, col + j)] += block[(i, j)];
                        }
                    }
                    let g = j_pose.transpose() * r;
                    for i in 0..6 {
                        gc[col + i] += g[i];
                        max_grad = max_grad.max(g[i].abs());
                    }
                    sys.w_view.push((col, j_pose.transpose() * j_point));
                }
                if let Some(fcol) = layout.focal_col[focal_class(vs.view.kind)] {
                    hcc[(fcol, fcol)] += (j_focal.transpose() * j_focal)[0];
                    let g = (j_focal.transpose() * r)[0];
                    gc[fcol] += g;
                    max_grad = max_grad.max(g.abs());
                    sys.w_focal.push((fcol, (j_focal.transpose() * j_point).transpose()));
                    if let Some(col) = layout.view_block[o.view.0] {
                        let cross = j_pose.transpose() * j_focal;
                        for i in 0..6 {
                            hcc[(col + i, fcol)] += cross[i];
                            hcc[(fcol, col + i)] += cross[i];
                        }
                    }
                }
                for v in (j_point.transpose() * r).iter() {
                    max_grad = max_grad.max(v.abs());
                }
            }
            tracks_sys.push((ti, sys));
        }

        // ---- λ retry loop --------------------------------------------------
        let mut accepted = false;
        while lambda <= 1e14 {
            // Schur complement with Marquardt scaling on both blocks
            let mut s = hcc.clone();
            for i in 0..layout.n_cols {
                s[(i, i)] += lambda * hcc[(i, i)].max(1e-12);
            }
            let mut rhs = -gc.clone();

            let mut hpp_inv: Vec<Matrix3<f64>> = Vec::with_capacity(tracks_sys.len());
            for (_, sys) in &tracks_sys {
                let mut hpp = sys.hpp;
                for i in 0..3 {
                    hpp[(i, i)] += lambda * sys.hpp[(i, i)].max(1e-12);
                }
                let inv = hpp.try_inverse().unwrap_or_else(Matrix3::zeros);
                hpp_inv.push(inv);

                let tmp = inv * sys.gp;
                for (col_a, w_a) in &sys.w_view {
                    let contrib = w_a * tmp;
                    for i in 0..6 {
                        rhs[col_a + i] += contrib[i];
                    }
                    for (col_b, w_b) in &sys.w_view {
                        let block = w_a * inv * w_b.transpose();
                        for i in 0..6 {
                            for j in 0..6 {
                                s[(col_a + i, col_b + j)] -= block[(i, j)];
                            }
                        }
                    }
                    for (fcol, w_f) in &sys.w_focal {
                        let block = w_a * (inv * w_f); // 6x1
                        for i in 0..6 {
                            s[(col_a + i, *fcol)] -= block[i];
                            s[(*fcol, col_a + i)] -= block[i];
                        }
                    }
                }
                for (fcol_a, w_fa) in &sys.w_focal {
                    rhs[*fcol_a] += w_fa.dot(&tmp);
                    for (fcol_b, w_fb) in &sys.w_focal {
                        s[(*fcol_a, *fcol_b)] -= w_fa.dot(&(inv * w_fb));
                    }
                }
            }

            let Some(delta_c) = s.clone().cholesky().map(|c| c.solve(&rhs)).or_else(|| {
                s.clone().lu().solve(&rhs)
            }) else {
                lambda *= nu;
                nu *= 2.0;
                continue;
            };

            // back-substitute the points and build a trial state
            let mut trial = state.clone();
            for (i, v) in state.views.iter().enumerate() {
                if let Some(col) = layout.view_block[i] {
                    let delta = Vector6::from_iterator((0..6).map(|j| delta_c[col + j]));
                    trial.views[i].view.pose = apply_pose_increment(&v.view.pose, &delta);
                }
            }
            for class in 0..2 {
                if let Some(fcol) = layout.focal_col[class] {
                    let df = delta_c[fcol];
                    for v in trial.views.iter_mut() {
                        if v.registered && focal_class(v.view.kind) == class {
                            v.view.intrinsics.fx += df;
                            v.view.intrinsics.fy += df;
                        }
                    }
                }
            }
            for ((ti, sys), inv) in tracks_sys.iter().zip(&hpp_inv) {
                let mut wt_dc = Vector3::zeros();
                for (col, w) in &sys.w_view {
                    let dc = Vector6::from_iterator((0..6).map(|j| delta_c[col + j]));
                    wt_dc += w.transpose() * dc;
                }
                for (fcol, w_f) in &sys.w_focal {
                    wt_dc += w_f * delta_c[*fcol];
                }
                let dp = -(inv * (sys.gp + wt_dc));
                let p = trial.tracks[*ti].point.as_mut().unwrap();
                *p += dp;
            }

            let new_cost = objective(&trial, opts);
            if new_cost.is_finite() && new_cost < cost {
                let decrease = (cost - new_cost) / cost.max(1e-300);
                *state = trial;
                cost = new_cost;
                accepted_costs.push(cost);
                lambda = (lambda / 3.0).max(1e-12);
                nu = 2.0;
                accepted = true;
                if decrease < opts.relative_decrease {
                    return Ok(BaReport { initial_cost, final_cost: cost, iterations, accepted_costs });
                }
                break;
            }
            lambda *= nu;
            nu *= 2.0;
        }

        if !accepted {
            // λ exhausted: either we are at a minimum or the problem is sick
            let at_minimum = max_grad <= 1e-6 * (1.0 + cost) || cost <= 1e-24;
            if at_minimum || cost < initial_cost {
                break;
            }
            return Err(Error::Optimization(format!(
                "no decreasing step found (cost {cost:.6e}, max gradient {max_grad:.3e}); state left at last stable values"
            )));
        }
    }

    Ok(BaReport { initial_cost, final_cost: cost, iterations, accepted_costs })
}
