//! Correspondence graph construction.
//!
//! Camera observations of one (projector, code) pair are correspondences by
//! construction. Codes from *different* projectors merge into one track when
//! some common camera image sees both within a sub-pixel radius; merging is
//! transitive (union-find), which is what lets tracks span projector-projector
//! pairs that never shared a camera directly.

use super::{DecodedView, FeatureTrack, Observation, ObservationSource};
use crate::geom::ViewId;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    /// Cross-projector merge radius in pixels.
    pub merge_threshold_px: f64,
    /// Attach projector-native observations (pattern pixel centers). Off
    /// reproduces the camera-only baseline: only codes seen by two or more
    /// cameras survive as tracks.
    pub include_projector_observations: bool,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self { merge_threshold_px: 0.5, include_projector_observations: true }
    }
}

type Key = (ViewId, (u32, u32));

pub fn build_tracks(decoded: &[DecodedView], opts: &TrackOptions) -> Vec<FeatureTrack> {
    // stable key numbering
    let mut key_ids: BTreeMap<Key, usize> = BTreeMap::new();
    for dv in decoded {
        for code in dv.features.keys() {
            let key = (dv.projector, *code);
            let next = key_ids.len();
            key_ids.entry(key).or_insert(next);
        }
    }
    let keys: Vec<Key> = {
        let mut v = vec![(ViewId(0), (0, 0)); key_ids.len()];
        for (k, &i) in &key_ids {
            v[i] = *k;
        }
        v
    };

    let mut uf = UnionFind::new(keys.len());

    // group sessions by camera placement; every pair of co-located sessions
    // from different projectors is a merge opportunity
    let mut by_camera: BTreeMap<ViewId, Vec<&DecodedView>> = BTreeMap::new();
    for dv in decoded {
        by_camera.entry(dv.camera).or_default().push(dv);
    }
    let r = opts.merge_threshold_px;
    for sessions in by_camera.values() {
        for (i, a) in sessions.iter().enumerate() {
            for b in sessions.iter().skip(i + 1) {
                if a.projector == b.projector {
                    continue;
                }
                // hash grid over b's feature positions, cell = merge radius
                let mut grid: BTreeMap<(i64, i64), Vec<(u32, u32)>> = BTreeMap::new();
                for (code, f) in &b.features {
                    let cell = ((f.position.0 / r).floor() as i64, (f.position.1 / r).floor() as i64);
                    grid.entry(cell).or_default().push(*code);
                }
                for (code_a, fa) in &a.features {
                    let cell = ((fa.position.0 / r).floor() as i64, (fa.position.1 / r).floor() as i64);
                    for dx in -1..=1 {
                        for dy in -1..=1 {
                            let Some(candidates) = grid.get(&(cell.0 + dx, cell.1 + dy)) else {
                                continue;
                            };
                            for code_b in candidates {
                                let fb = &b.features[code_b];
                                let d2 = (fa.position.0 - fb.position.0).powi(2)
                                    + (fa.position.1 - fb.position.1).powi(2);
                                if d2 < r * r {
                                    uf.union(
                                        key_ids[&(a.projector, *code_a)],
                                        key_ids[&(b.projector, *code_b)],
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // gather members per component, in stable key order
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..keys.len() {
        components.entry(uf.find(i)).or_default().push(i);
    }

    // camera observations per key
    let mut camera_obs: BTreeMap<usize, Vec<(ViewId, (f64, f64))>> = BTreeMap::new();
    for dv in decoded {
        for (code, f) in &dv.features {
            camera_obs
                .entry(key_ids[&(dv.projector, *code)])
                .or_default()
                .push((dv.camera, f.position));
        }
    }

    let mut tracks = Vec::new();
    'component: for members in components.values() {
        let mut projectors = BTreeSet::new();
        let mut proj_positions: BTreeMap<ViewId, (f64, f64)> = BTreeMap::new();
        for &m in members {
            let (proj, code) = keys[m];
            let center = (code.0 as f64 + 0.5, code.1 as f64 + 0.5);
            if let Some(existing) = proj_positions.get(&proj) {
                if *existing != center {
                    // two distinct codes of one projector fused through a
                    // merge chain: ambiguous, discard the whole component
                    continue 'component;
                }
            }
            proj_positions.insert(proj, center);
            projectors.insert(proj);
        }

        // camera observations; sessions of the same camera that saw several
        // merged codes collapse to the mean position (all within the radius)
        let mut cam_acc: BTreeMap<ViewId, (f64, f64, usize)> = BTreeMap::new();
        for &m in members {
            if let Some(obs) = camera_obs.get(&m) {
                for (cam, pos) in obs {
                    let e = cam_acc.entry(*cam).or_insert((0.0, 0.0, 0));
                    e.0 += pos.0;
                    e.1 += pos.1;
                    e.2 += 1;
                }
            }
        }

        let mut observations: Vec<Observation> = cam_acc
            .into_iter()
            .map(|(view, (sx, sy, n))| Observation {
                view,
                position: (sx / n as f64, sy / n as f64),
                source: ObservationSource::CameraDecoded,
            })
            .collect();
        if opts.include_projector_observations {
            for (&view, &position) in &proj_positions {
                observations.push(Observation {
                    view,
                    position,
                    source: ObservationSource::ProjectorNative,
                });
            }
        }
        if observations.len() < 2 {
            continue;
        }
        observations.sort_by_key(|o| o.view);
        tracks.push(FeatureTrack { id: tracks.len(), observations, projectors });
    }
    tracks
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // deterministic: smaller root wins
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graycode::Feature;

    fn session(camera: usize, projector: usize, feats: &[((u32, u32), (f64, f64))]) -> DecodedView {
        DecodedView {
            camera: ViewId(camera),
            projector: ViewId(projector),
            features: feats
                .iter()
                .map(|(code, pos)| (*code, Feature { position: *pos, support: 1 }))
                .collect(),
        }
    }

    #[test]
    fn shared_code_joins_two_cameras_and_the_projector() {
        let decoded = vec![
            session(0, 2, &[((5, 5), (10.0, 10.0))]),
            session(1, 2, &[((5, 5), (20.0, 15.0))]),
        ];
        let tracks = build_tracks(&decoded, &TrackOptions::default());
        assert_eq!(tracks.len(), 1);
        let t = &tracks[0];
        assert_eq!(t.observations.len(), 3);
        let native: Vec<_> =
            t.observations.iter().filter(|o| o.source == ObservationSource::ProjectorNative).collect();
        assert_eq!(native.len(), 1);
        assert_eq!(native[0].view, ViewId(2));
        assert_eq!(native[0].position, (5.5, 5.5));
    }

    #[test]
    fn cross_projector_merge_respects_half_pixel_radius() {
        // two projectors, their codes land 0.4 px apart in camera 0 -> merge;
        // a second pair lands 0.6 px apart -> stays separate
        let decoded = vec![
            session(0, 10, &[((1, 1), (50.0, 50.0)), ((2, 2), (80.0, 80.0))]),
            session(0, 11, &[((3, 3), (50.4, 50.0)), ((4, 4), (80.6, 80.0))]),
            // second camera so each unmerged code still has >= 2 observations
            session(1, 10, &[((1, 1), (10.0, 10.0)), ((2, 2), (20.0, 20.0))]),
            session(1, 11, &[((3, 3), (90.0, 90.0)), ((4, 4), (95.0, 95.0))]),
        ];
        let tracks = build_tracks(&decoded, &TrackOptions::default());
        let multi: Vec<_> = tracks.iter().filter(|t| t.projectors.len() == 2).collect();
        assert_eq!(multi.len(), 1, "exactly the 0.4 px pair merges");
        // merged track carries one native observation per projector
        assert_eq!(
            multi[0]
                .observations
                .iter()
                .filter(|o| o.source == ObservationSource::ProjectorNative)
                .count(),
            2
        );
        assert_eq!(tracks.len(), 3); // merged pair + two singles
    }

    #[test]
    fn camera_only_mode_requires_two_cameras() {
        let decoded = vec![
            session(0, 2, &[((5, 5), (10.0, 10.0)), ((6, 6), (12.0, 12.0))]),
            session(1, 2, &[((5, 5), (20.0, 15.0))]),
        ];
        let opts =
            TrackOptions { include_projector_observations: false, ..TrackOptions::default() };
        let tracks = build_tracks(&decoded, &opts);
        // code (6,6) is seen by a single camera: no track without the projector
        assert_eq!(tracks.len(), 1);
        assert!(tracks[0]
            .observations
            .iter()
            .all(|o| o.source == ObservationSource::CameraDecoded));
    }

    #[test]
    fn merge_is_transitive_across_cameras() {
        // P10~P11 via camera 0, P11~P12 via camera 1 => one track of 3 projectors
        let decoded = vec![
            session(0, 10, &[((1, 1), (30.0, 30.0))]),
            session(0, 11, &[((2, 2), (30.2, 30.0))]),
            session(1, 11, &[((2, 2), (60.0, 60.0))]),
            session(1, 12, &[((3, 3), (60.0, 60.3))]),
        ];
        let tracks = build_tracks(&decoded, &TrackOptions::default());
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].projectors.len(), 3);
    }

    #[test]
    fn partition_is_invariant_to_session_order() {
        let base = vec![
            session(0, 10, &[((1, 1), (30.0, 30.0)), ((9, 9), (99.0, 99.0))]),
            session(0, 11, &[((2, 2), (30.2, 30.0))]),
            session(1, 11, &[((2, 2), (60.0, 60.0))]),
            session(1, 12, &[((3, 3), (60.0, 60.3))]),
            session(1, 10, &[((9, 9), (40.0, 40.0))]),
        ];
        let tracks_fwd = build_tracks(&base, &TrackOptions::default());
        let mut rev = base.clone();
        rev.reverse();
        let tracks_rev = build_tracks(&rev, &TrackOptions::default());

        let partition = |tracks: &[FeatureTrack]| -> BTreeSet<Vec<(usize, String)>> {
            tracks
                .iter()
                .map(|t| {
                    let mut obs: Vec<(usize, String)> = t
                        .observations
                        .iter()
                        .map(|o| (o.view.0, format!("{:?}{:.3},{:.3}", o.source, o.position.0, o.position.1)))
                        .collect();
                    obs.sort();
                    obs
                })
                .collect()
        };
        assert_eq!(partition(&tracks_fwd), partition(&tracks_rev));
    }

    #[test]
    fn ambiguous_same_projector_fusion_is_dropped() {
        // codes (1,1) and (5,5) of projector 10 both merge with (2,2) of
        // projector 11 through different cameras -> component contains two
        // distinct codes of projector 10 and must be discarded
        let decoded = vec![
            session(0, 10, &[((1, 1), (30.0, 30.0))]),
            session(0, 11, &[((2, 2), (30.1, 30.0))]),
            session(1, 11, &[((2, 2), (60.0, 60.0))]),
            session(1, 10, &[((5, 5), (60.1, 60.0))]),
        ];
        let tracks = build_tracks(&decoded, &TrackOptions::default());
        assert!(tracks.is_empty());
    }
}
