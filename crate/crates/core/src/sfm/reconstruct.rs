//! Incremental reconstruction driver: bootstrap from the best-connected pair,
//! then repeatedly register the view with the most 2D-3D anchors, triangulate
//! newly covered tracks, and globally bundle-adjust.

use super::pnp::PnpOptions;
use super::{
    bundle_adjust, initialize_pair, register_view, weighted_cost, BaOptions, FeatureTrack,
    ReconstructionState, TrackState, TwoViewOptions, ViewState,
};
use crate::error::{Error, Result};
use crate::geom::{triangulate, DeviceKind, DeviceView, Intrinsics, Pose, ViewId};
use std::collections::BTreeMap;

/// Unregistered device placement: identity pose until the pipeline solves it.
#[derive(Debug, Clone)]
pub struct ViewSeed {
    pub id: ViewId,
    pub kind: DeviceKind,
    /// Initial intrinsics guess (nominal focal, centered principal point).
    pub intrinsics: Intrinsics,
}

#[derive(Debug, Clone)]
pub struct SfmOptions {
    pub w_p: f64,
    pub refine_intrinsics: bool,
    pub huber_px: Option<f64>,
    pub ransac_threshold_px: f64,
    pub ransac_iterations: usize,
    pub reprojection_gate_px: f64,
    pub seed: u64,
}

impl Default for SfmOptions {
    fn default() -> Self {
        Self {
            w_p: 100.0,
            refine_intrinsics: true,
            huber_px: None,
            ransac_threshold_px: 1.0,
            ransac_iterations: 2000,
            reprojection_gate_px: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SfmSummary {
    pub registered_views: usize,
    pub point_count: usize,
    pub final_cost: f64,
}

/// Run the full incremental pipeline over prebuilt tracks.
pub fn reconstruct(
    seeds: &[ViewSeed],
    tracks: Vec<FeatureTrack>,
    opts: &SfmOptions,
) -> Result<(ReconstructionState, SfmSummary)> {
    let max_id = seeds.iter().map(|s| s.id.0).max().ok_or_else(|| {
        Error::argument("reconstruction needs at least two views".to_string())
    })?;
    let mut views: Vec<Option<ViewState>> = vec![None; max_id + 1];
    for s in seeds {
        views[s.id.0] = Some(ViewState {
            view: DeviceView {
                id: s.id,
                kind: s.kind,
                intrinsics: s.intrinsics,
                pose: Pose::identity(),
            },
            registered: false,
        });
    }
    let views: Vec<ViewState> = views
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::argument(format!("view ids must be dense, {i} missing"))))
        .collect::<Result<_>>()?;

    let mut state = ReconstructionState {
        views,
        tracks: tracks.into_iter().map(|track| TrackState { track, point: None }).collect(),
    };

    // ---- bootstrap pair: most shared tracks first -------------------------
    let mut pair_counts: BTreeMap<(ViewId, ViewId), usize> = BTreeMap::new();
    for t in &state.tracks {
        for (i, a) in t.track.observations.iter().enumerate() {
            for b in t.track.observations.iter().skip(i + 1) {
                let key = if a.view < b.view { (a.view, b.view) } else { (b.view, a.view) };
                *pair_counts.entry(key).or_insert(0) += 1;
            }
        }
    }
    let mut candidates: Vec<((ViewId, ViewId), usize)> = pair_counts.into_iter().collect();
    candidates.sort_by_key(|&((a, b), n)| (std::cmp::Reverse(n), a, b));

    let two_view = TwoViewOptions {
        ransac_threshold_px: opts.ransac_threshold_px,
        ransac_iterations: opts.ransac_iterations,
        seed: opts.seed,
        reprojection_gate_px: opts.reprojection_gate_px,
    };
    let mut initialized = false;
    let mut last_err = None;
    for ((a, b), _) in candidates.iter().take(8) {
        match initialize_pair(&mut state, *a, *b, &two_view) {
            Ok(_) => {
                initialized = true;
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    if !initialized {
        return Err(last_err
            .unwrap_or_else(|| Error::Initialization("no usable view pair".to_string())));
    }

    let ba_opts = BaOptions {
        w_p: opts.w_p,
        refine_intrinsics: false, // hold intrinsics until the rig is braced
        huber_px: opts.huber_px,
        ..BaOptions::default()
    };
    bundle_adjust(&mut state, &ba_opts)?;

    // ---- incremental registration -----------------------------------------
    let pnp = PnpOptions {
        ransac_threshold_px: opts.reprojection_gate_px,
        ransac_iterations: opts.ransac_iterations.min(500),
        seed: opts.seed,
    };
    loop {
        triangulate_pending(&mut state, opts.reprojection_gate_px);

        // next view: most anchors on current structure
        let mut best: Option<(usize, ViewId)> = None;
        for vs in &state.views {
            if vs.registered {
                continue;
            }
            let anchors = state
                .tracks
                .iter()
                .filter(|t| t.point.is_some() && t.track.observation_in(vs.view.id).is_some())
                .count();
            if anchors >= 6 && best.map_or(true, |(n, _)| anchors > n) {
                best = Some((anchors, vs.view.id));
            }
        }
        let Some((_, next)) = best else { break };
        register_view(&mut state, next, &pnp)?;
        triangulate_pending(&mut state, opts.reprojection_gate_px);

        let refine_now = opts.refine_intrinsics && state.registered_count() >= 3;
        let ba_opts = BaOptions { refine_intrinsics: refine_now, ..ba_opts };
        bundle_adjust(&mut state, &ba_opts)?;
    }

    // final polish with the configured intrinsics mode
    let ba_opts = BaOptions { refine_intrinsics: opts.refine_intrinsics, ..ba_opts };
    bundle_adjust(&mut state, &ba_opts)?;
    triangulate_pending(&mut state, opts.reprojection_gate_px);
    bundle_adjust(&mut state, &ba_opts)?;

    let summary = SfmSummary {
        registered_views: state.registered_count(),
        point_count: state.point_count(),
        final_cost: weighted_cost(&state, opts.w_p),
    };
    Ok((state, summary))
}

/// Triangulate every pointless track with two or more registered
/// observations, keeping results that reproject within the gate everywhere
/// and sit in front of every observing device.
fn triangulate_pending(state: &mut ReconstructionState, gate_px: f64) {
    let mut new_points: Vec<(usize, nalgebra::Point3<f64>)> = Vec::new();
    for (ti, t) in state.tracks.iter().enumerate() {
        if t.point.is_some() {
            continue;
        }
        let obs: Vec<(&DeviceView, (f64, f64))> = t
            .track
            .observations
            .iter()
            .filter(|o| state.view(o.view).registered)
            .map(|o| (&state.view(o.view).view, o.position))
            .collect();
        if obs.len() < 2 {
            continue;
        }
        let Ok(p) = triangulate(&obs) else { continue };
        let in_front = obs.iter().all(|(v, _)| v.pose.transform(&p).z > 0.0);
        if !in_front {
            continue;
        }
        let rms = crate::geom::reprojection_rms(&p, &obs);
        if rms < gate_px {
            new_points.push((ti, p));
        }
    }
    for (ti, p) in new_points {
        state.tracks[ti].point = Some(p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sfm::align_similarity;
    use crate::sfm::twoview::tests::{random_cloud, ring_views, state_from_points};
    use nalgebra::Point3;

    #[test]
    fn full_rig_reconstructs_up_to_similarity() {
        let mut true_views = ring_views(6, 2.0, 0.8);
        for (i, v) in true_views.iter_mut().enumerate() {
            if i % 2 == 1 {
                v.kind = DeviceKind::Projector;
            }
        }
        let points = random_cloud(500, 40);
        // borrow the observation generator, then strip to tracks
        let proto = state_from_points(true_views.clone(), &true_views, &points);
        let tracks: Vec<FeatureTrack> = proto.tracks.into_iter().map(|t| t.track).collect();
        let seeds: Vec<ViewSeed> = true_views
            .iter()
            .map(|v| ViewSeed { id: v.id, kind: v.kind, intrinsics: v.intrinsics })
            .collect();

        let (state, summary) =
            reconstruct(&seeds, tracks, &SfmOptions { refine_intrinsics: false, ..Default::default() })
                .unwrap();
        assert_eq!(summary.registered_views, 6);
        assert!(summary.point_count > 400, "points {}", summary.point_count);
        assert!(summary.final_cost < 1e-8, "cost {}", summary.final_cost);

        // compare in the ground-truth frame
        let est_centers: Vec<Point3<f64>> =
            state.views.iter().map(|v| v.view.pose.center()).collect();
        let true_centers: Vec<Point3<f64>> =
            true_views.iter().map(|v| v.pose.center()).collect();
        let sim = align_similarity(&est_centers, &true_centers).unwrap();
        for (est, truth) in est_centers.iter().zip(&true_centers) {
            assert!((sim.apply(est) - truth).norm() < 1e-6);
        }
    }
}
