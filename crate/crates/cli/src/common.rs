//! Shared plumbing: config layering, decode-to-tracks, operator setup, and
//! ground-truth alignment.


use procam::config::PipelineConfig;
use procam::error::{Error, Result};
use procam::geom::{DeviceView, ViewId};
use procam::graycode::{decode, extract_features, DecodeOptions, FeatureOptions};
use procam::reflectance::ForwardOperator;
use procam::sfm::{align_similarity, DecodedView, ReconstructionState, Similarity};
use procam::spectral::{fit_basis, training_reflectances, BasisMean};
use procam::synth::LoadedCapture;
use std::path::Path;

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::from_json_file(p),
        None => Ok(PipelineConfig::default()),
    }
}

/// Decode every capture pair's pattern stack into sub-pixel features.
pub fn decode_all_pairs(capture: &LoadedCapture, config: &PipelineConfig) -> Result<Vec<DecodedView>> {
    let decode_opts = DecodeOptions { contrast_floor: config.contrast_floor };
    let feature_opts = FeatureOptions { support_cap: config.support_cap };
    capture
        .manifest
        .pairs
        .iter()
        .zip(&capture.patterns)
        .map(|(pair, stack)| {
            let map = decode(stack, &capture.manifest.graycode, &decode_opts)?;
            Ok(DecodedView {
                camera: ViewId(pair.camera),
                projector: ViewId(pair.projector),
                features: extract_features(&map, &feature_opts),
            })
        })
        .collect()
}

/// The spectral forward operator for a capture, with the basis fitted from
/// the bundled training library on the capture's grid.
pub fn operator_for_capture(capture: &LoadedCapture, config: &PipelineConfig) -> Result<ForwardOperator> {
    let grid = capture.manifest.grid;
    let mean = if config.basis_mean_centered { BasisMean::Centered } else { BasisMean::Zero };
    let basis = fit_basis(&training_reflectances(&grid), config.n_basis, mean)?;
    Ok(ForwardOperator::new(&basis, &capture.illuminations()?, &capture.sensitivity()?, config.gamma)?
        .with_thresholds(config.saturation_threshold, config.min_shading))
}

/// Similarity mapping the reconstruction's gauge onto the ground-truth frame,
/// fitted on registered device centers.
pub fn gauge_to_ground_truth(
    state: &ReconstructionState,
    gt_views: &[DeviceView],
) -> Result<Similarity> {
    let mut est = Vec::new();
    let mut truth = Vec::new();
    for vs in &state.views {
        if !vs.registered {
            continue;
        }
        let gt = gt_views
            .iter()
            .find(|g| g.id == vs.view.id)
            .ok_or_else(|| Error::config(format!("ground truth lacks view {}", vs.view.id.0)))?;
        est.push(vs.view.pose.center());
        truth.push(gt.pose.center());
    }
    align_similarity(&est, &truth)
}

/// Map the whole reconstruction (poses + points) through a similarity.
pub fn apply_gauge(state: &mut ReconstructionState, sim: &Similarity) {
    for vs in &mut state.views {
        if vs.registered {
            vs.view.pose = sim.apply_to_pose(&vs.view.pose);
        }
    }
    for t in &mut state.tracks {
        if let Some(p) = t.point.as_mut() {
            *p = sim.apply(p);
        }
    }
}

/// Registered (projector, camera) view-id pairs of the capture, with their
/// original pair indices.
pub fn registered_pairs(
    capture: &LoadedCapture,
    state: &ReconstructionState,
) -> Vec<(usize, (ViewId, ViewId))> {
    capture
        .manifest
        .pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            state.views.get(p.projector).is_some_and(|v| v.registered)
                && state.views.get(p.camera).is_some_and(|v| v.registered)
        })
        .map(|(i, p)| (i, (ViewId(p.projector), ViewId(p.camera))))
        .collect()
}

