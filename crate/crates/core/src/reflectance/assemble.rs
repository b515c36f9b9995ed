//! Build per-point multispectral observation stacks from captured color
//! frames: bilinear samples at each point's sub-pixel track position, one
//! stack per visible projector-camera pair.

use super::PairObservation;
use crate::error::{Error, Result};
use crate::geom::{shading_factor, DeviceView, OrientedPoint, ViewId};
use crate::img::RgbImage;
use std::collections::BTreeMap;

/// A reconstructed point plus where its track saw it in each camera view.
#[derive(Debug, Clone)]
pub struct SamplePoint {
    pub point: OrientedPoint,
    pub positions: BTreeMap<ViewId, (f64, f64)>,
}

/// For every point, the observation stacks of its visible pairs.
///
/// `visible[k]` holds pair indices (the 𝒱(k) set); pairs whose camera view
/// has no track position for the point are skipped. Intensities come from
/// bilinear sampling of the pair's color frames; the shading factor comes
/// from the pair's projector center and the point's normal.
pub fn assemble_observations(
    points: &[SamplePoint],
    pairs: &[(ViewId, ViewId)],
    views: &[DeviceView],
    visible: &[Vec<usize>],
    colors: &[Vec<RgbImage>],
) -> Result<Vec<Vec<PairObservation>>> {
    if visible.len() != points.len() {
        return Err(Error::argument("visibility list must align with points".to_string()));
    }
    if colors.len() != pairs.len() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("have color frames for {} pairs, expected {}", colors.len(), pairs.len()),
        )));
    }

    let mut out = Vec::with_capacity(points.len());
    for (sample, vis) in points.iter().zip(visible) {
        let mut per_pair = Vec::new();
        for &pair_idx in vis {
            let (proj_id, cam_id) = pairs[pair_idx];
            let Some(&(u, v)) = sample.positions.get(&cam_id) else { continue };
            let projector = &views[proj_id.0];
            let shading = shading_factor(
                &projector.pose.center(),
                &sample.point.position,
                &sample.point.normal,
            )?;
            let frames = &colors[pair_idx];
            let mut y = Vec::with_capacity(frames.len() * 3);
            for frame in frames {
                let rgb = frame.sample_bilinear(u, v);
                y.extend_from_slice(&rgb);
            }
            per_pair.push(PairObservation { pair: pair_idx, y, shading });
        }
        out.push(per_pair);
    }
    Ok(out)
}
