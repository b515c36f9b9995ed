//! Self-calibrating incremental structure-from-motion over structured-light
//! feature tracks, with projectors registered as first-class viewpoints and a
//! projector-weighted bundle adjustment.

mod align;
mod ba;
mod io;
mod pnp;
mod reconstruct;
mod tracks;
mod twoview;

pub use align::{align_similarity, apply_similarity, Similarity};
pub use ba::{bundle_adjust, weighted_cost, BaOptions, BaReport};
pub use io::{read_reconstruction_json, write_reconstruction_json, write_reconstruction_ply};
pub use pnp::register_view;
pub use reconstruct::{reconstruct, SfmOptions, SfmSummary, ViewSeed};
pub use tracks::{build_tracks, TrackOptions};
pub use twoview::{eight_point, eight_point_weighted, initialize_pair, sampson_distance, TwoViewOptions};

use crate::geom::{DeviceKind, DeviceView, ViewId};
use crate::graycode::FeatureSet;
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Where a 2D measurement came from. Projector-native observations are exact
/// pattern pixel centers, which is why the bundle adjustment may weight them
/// harder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    CameraDecoded,
    ProjectorNative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub view: ViewId,
    pub position: (f64, f64),
    pub source: ObservationSource,
}

/// One projector code tracked across device placements. Tracks that merged
/// codes from several projectors carry one projector-native observation per
/// originating projector.
#[derive(Debug, Clone)]
pub struct FeatureTrack {
    pub id: usize,
    pub observations: Vec<Observation>,
    pub projectors: BTreeSet<ViewId>,
}

impl FeatureTrack {
    pub fn observation_in(&self, view: ViewId) -> Option<&Observation> {
        self.observations.iter().find(|o| o.view == view)
    }
}

/// The decoded features of one capture session: what `camera` saw while
/// `projector` was emitting patterns.
#[derive(Debug, Clone)]
pub struct DecodedView {
    pub camera: ViewId,
    pub projector: ViewId,
    pub features: FeatureSet,
}

/// Per-view reconstruction bookkeeping.
#[derive(Debug, Clone)]
pub struct ViewState {
    pub view: DeviceView,
    pub registered: bool,
}

#[derive(Debug, Clone)]
pub struct TrackState {
    pub track: FeatureTrack,
    pub point: Option<Point3<f64>>,
}

/// Views, tracks, and their current geometry. Views are indexed by
/// `ViewId.0`; the gauge is fixed by the first registered view staying at its
/// initialization pose.
#[derive(Debug, Clone)]
pub struct ReconstructionState {
    pub views: Vec<ViewState>,
    pub tracks: Vec<TrackState>,
}

impl ReconstructionState {
    pub fn view(&self, id: ViewId) -> &ViewState {
        &self.views[id.0]
    }

    pub fn registered_count(&self) -> usize {
        self.views.iter().filter(|v| v.registered).count()
    }

    pub fn point_count(&self) -> usize {
        self.tracks.iter().filter(|t| t.point.is_some()).count()
    }

    /// Bundle-adjustment weight of a view.
    pub fn weight(kind: DeviceKind, w_p: f64) -> f64 {
        match kind {
            DeviceKind::Camera => 1.0,
            DeviceKind::Projector => w_p,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_dispatch_matches_device_kind() {
        assert_eq!(ReconstructionState::weight(DeviceKind::Camera, 100.0), 1.0);
        assert_eq!(ReconstructionState::weight(DeviceKind::Projector, 100.0), 100.0);
        assert_eq!(ReconstructionState::weight(DeviceKind::Projector, 7.5), 7.5);
    }
}
