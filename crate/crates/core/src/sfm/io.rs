//! Reconstruction serialization: JSON for the full state, PLY for the points.

use super::{
    FeatureTrack, Observation, ObservationSource, ReconstructionState, TrackState, ViewState,
};
use crate::error::Result;
use crate::geom::{DeviceKind, DeviceView, Intrinsics, Pose, ViewId};
use crate::ply::{write_point_cloud, PointCloud};
use nalgebra::{Point3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct ViewRecord {
    id: usize,
    kind: DeviceKind,
    registered: bool,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    /// world→device rotation, wxyz
    rotation: [f64; 4],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct ObservationRecord {
    view: usize,
    u: f64,
    v: f64,
    source: ObservationSource,
}

#[derive(Serialize, Deserialize)]
struct TrackRecord {
    observations: Vec<ObservationRecord>,
    projectors: Vec<usize>,
    point: Option<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct ReconstructionFile {
    views: Vec<ViewRecord>,
    tracks: Vec<TrackRecord>,
}

pub fn write_reconstruction_json(path: &Path, state: &ReconstructionState) -> Result<()> {
    let file = ReconstructionFile {
        views: state
            .views
            .iter()
            .map(|vs| {
                let q = vs.view.pose.quaternion();
                ViewRecord {
                    id: vs.view.id.0,
                    kind: vs.view.kind,
                    registered: vs.registered,
                    fx: vs.view.intrinsics.fx,
                    fy: vs.view.intrinsics.fy,
                    cx: vs.view.intrinsics.cx,
                    cy: vs.view.intrinsics.cy,
                    width: vs.view.intrinsics.width,
                    height: vs.view.intrinsics.height,
                    rotation: [q.w, q.i, q.j, q.k],
                    translation: vs.view.pose.translation.into(),
                }
            })
            .collect(),
        tracks: state
            .tracks
            .iter()
            .map(|t| TrackRecord {
                observations: t
                    .track
                    .observations
                    .iter()
                    .map(|o| ObservationRecord {
                        view: o.view.0,
                        u: o.position.0,
                        v: o.position.1,
                        source: o.source,
                    })
                    .collect(),
                projectors: t.track.projectors.iter().map(|p| p.0).collect(),
                point: t.point.map(|p| [p.x, p.y, p.z]),
            })
            .collect(),
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn read_reconstruction_json(path: &Path) -> Result<ReconstructionState> {
    let text = std::fs::read_to_string(path)?;
    let file: ReconstructionFile = serde_json::from_str(&text)?;
    let views = file
        .views
        .into_iter()
        .map(|v| {
            let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                v.rotation[0],
                v.rotation[1],
                v.rotation[2],
                v.rotation[3],
            ));
            Ok(ViewState {
                view: DeviceView {
                    id: ViewId(v.id),
                    kind: v.kind,
                    intrinsics: Intrinsics::new(v.fx, v.fy, v.cx, v.cy, v.width, v.height)?,
                    pose: Pose::from_parts(
                        Rotation3::from(q),
                        Vector3::new(v.translation[0], v.translation[1], v.translation[2]),
                    ),
                },
                registered: v.registered,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tracks = file
        .tracks
        .into_iter()
        .enumerate()
        .map(|(id, t)| TrackState {
            track: FeatureTrack {
                id,
                observations: t
                    .observations
                    .into_iter()
                    .map(|o| Observation {
                        view: ViewId(o.view),
                        position: (o.u, o.v),
                        source: o.source,
                    })
                    .collect(),
                projectors: t.projectors.into_iter().map(ViewId).collect::<BTreeSet<_>>(),
            },
            point: t.point.map(|p| Point3::new(p[0], p[1], p[2])),
        })
        .collect();
    Ok(ReconstructionState { views, tracks })
}

/// Reconstructed points only; normals are not estimated at this stage and
/// export as +z placeholders.
pub fn write_reconstruction_ply(path: &Path, state: &ReconstructionState) -> Result<()> {
    let positions: Vec<Point3<f64>> =
        state.tracks.iter().filter_map(|t| t.point).collect();
    let normals = vec![Vector3::z(); positions.len()];
    write_point_cloud(path, &PointCloud { positions, normals, reflectance: None, colors: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sfm::twoview::tests::{random_cloud, ring_views, state_from_points};

    #[test]
    fn json_round_trip_preserves_views_and_points() {
        let true_views = ring_views(3, 2.0, 0.8);
        let points = random_cloud(20, 50);
        let mut state = state_from_points(true_views.clone(), &true_views, &points);
        state.views[0].registered = true;
        for (t, p) in state.tracks.iter_mut().zip(&points) {
            t.point = Some(*p);
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("recon.json");
        write_reconstruction_json(&path, &state).unwrap();
        let back = read_reconstruction_json(&path).unwrap();

        assert_eq!(back.views.len(), state.views.len());
        assert!(back.views[0].registered);
        assert!(!back.views[1].registered);
        for (a, b) in back.views.iter().zip(&state.views) {
            let dr = (a.view.pose.rotation.matrix() - b.view.pose.rotation.matrix()).norm();
            assert!(dr < 1e-12, "rotation drift {dr}");
            assert!((a.view.pose.translation - b.view.pose.translation).norm() < 1e-12);
        }
        assert_eq!(back.tracks.len(), state.tracks.len());
        for (a, b) in back.tracks.iter().zip(&state.tracks) {
            assert_eq!(a.track.observations.len(), b.track.observations.len());
            assert!((a.point.unwrap() - b.point.unwrap()).norm() < 1e-12);
        }
    }
}
