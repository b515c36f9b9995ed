use crate::common;
use clap::Args;
use procam::config::PipelineConfig;
use procam::error::Result;
use procam::sfm::{
    build_tracks, reconstruct, weighted_cost, write_reconstruction_json, write_reconstruction_ply,
    SfmOptions, TrackOptions,
};
use procam::synth::read_capture;
use std::path::PathBuf;

#[derive(Args)]
pub struct ReconstructArgs {
    /// Capture directory produced by `synth` (or laid out the same way).
    #[arg(long)]
    capture: PathBuf,
    /// Output directory for reconstruction.json and points.ply.
    #[arg(long)]
    out: PathBuf,
    /// Projector observation weight in the bundle adjustment.
    #[arg(long)]
    w_p: Option<f64>,
    /// Drop projector-native observations: tracks need two cameras, the
    /// camera-only baseline.
    #[arg(long)]
    camera_only_tracks: bool,
    /// Huber loss scale in pixels (robust mode for noisy captures).
    #[arg(long)]
    huber_px: Option<f64>,
    /// Hold intrinsics at their nominal values.
    #[arg(long)]
    fix_intrinsics: bool,
}

pub fn run(args: ReconstructArgs, config: &PipelineConfig) -> Result<()> {
    let capture = read_capture(&args.capture)?;
    let decoded = common::decode_all_pairs(&capture, config)?;
    let feature_total: usize = decoded.iter().map(|d| d.features.len()).sum();

    let tracks = build_tracks(
        &decoded,
        &TrackOptions {
            merge_threshold_px: config.merge_threshold_px,
            include_projector_observations: !args.camera_only_tracks,
        },
    );
    println!("decoded {feature_total} features into {} tracks", tracks.len());

    let opts = SfmOptions {
        w_p: args.w_p.unwrap_or(config.w_p),
        refine_intrinsics: config.refine_intrinsics && !args.fix_intrinsics,
        huber_px: args.huber_px.or(config.huber_px),
        ransac_threshold_px: config.ransac_threshold_px,
        ransac_iterations: config.ransac_iterations,
        reprojection_gate_px: config.reprojection_gate_px,
        seed: config.seed,
    };
    let (state, summary) = reconstruct(&capture.view_seeds()?, tracks, &opts)?;

    std::fs::create_dir_all(&args.out)?;
    write_reconstruction_json(&args.out.join("reconstruction.json"), &state)?;
    write_reconstruction_ply(&args.out.join("points.ply"), &state)?;
    println!(
        "registered {} views, {} points, weighted cost {:.6e}",
        summary.registered_views,
        summary.point_count,
        weighted_cost(&state, opts.w_p)
    );
    Ok(())
}
