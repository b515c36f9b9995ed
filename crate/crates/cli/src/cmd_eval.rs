use crate::common;
use clap::Args;
use nalgebra::Point3;
use procam::config::PipelineConfig;
use procam::error::Result;
use procam::sfm::read_reconstruction_json;
use procam::synth::read_capture;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    capture: PathBuf,
    #[arg(long)]
    reconstruction: PathBuf,
    /// Optional JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ViewError {
    id: usize,
    kind: String,
    rotation_error_rad: f64,
    center_error: f64,
}

#[derive(Serialize)]
struct EvalReport {
    aligned_scale: f64,
    views: Vec<ViewError>,
    max_rotation_error_rad: f64,
    max_center_error_rel: f64,
    point_count: usize,
    point_to_surface_rms: f64,
    point_to_surface_rms_rel: f64,
    bbox_diagonal: f64,
}

pub fn run(args: EvalArgs, _config: &PipelineConfig) -> Result<()> {
    let capture = read_capture(&args.capture)?;
    let mut state = read_reconstruction_json(&args.reconstruction)?;
    let gt_views = capture.ground_truth_views()?;
    let mesh = capture.ground_truth_mesh()?;

    let sim = common::gauge_to_ground_truth(&state, &gt_views)?;
    common::apply_gauge(&mut state, &sim);

    let diag = mesh.bbox_diagonal();
    let mut views = Vec::new();
    let mut max_rot: f64 = 0.0;
    let mut max_center: f64 = 0.0;
    for vs in &state.views {
        if !vs.registered {
            continue;
        }
        let gt = gt_views.iter().find(|g| g.id == vs.view.id).unwrap();
        let rot = vs.view.pose.rotation_angle_to(&gt.pose);
        let center = (vs.view.pose.center() - gt.pose.center()).norm();
        max_rot = max_rot.max(rot);
        max_center = max_center.max(center);
        views.push(ViewError {
            id: vs.view.id.0,
            kind: format!("{:?}", vs.view.kind).to_lowercase(),
            rotation_error_rad: rot,
            center_error: center,
        });
    }

    let points: Vec<Point3<f64>> = state.tracks.iter().filter_map(|t| t.point).collect();
    let mut sum_sq = 0.0;
    for p in &points {
        let d = mesh.distance_to_surface(p);
        sum_sq += d * d;
    }
    let rms = if points.is_empty() { 0.0 } else { (sum_sq / points.len() as f64).sqrt() };

    let report = EvalReport {
        aligned_scale: sim.scale,
        views,
        max_rotation_error_rad: max_rot,
        max_center_error_rel: max_center / diag,
        point_count: points.len(),
        point_to_surface_rms: rms,
        point_to_surface_rms_rel: rms / diag,
        bbox_diagonal: diag,
    };
    println!(
        "{} registered views: max rotation error {:.3e} rad, max center error {:.3e} (relative {:.3e})",
        report.views.len(),
        max_rot,
        max_center,
        report.max_center_error_rel
    );
    println!(
        "{} points: RMS distance to surface {:.3e} ({:.3e} of bbox diagonal)",
        report.point_count, rms, report.point_to_surface_rms_rel
    );
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}
