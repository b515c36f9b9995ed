use clap::Args;
use procam::config::PipelineConfig;
use procam::error::{Error, Result};
use procam::synth::{build_scene, render_capture, write_capture, SceneOverrides};
use std::path::PathBuf;

#[derive(Args)]
pub struct SynthArgs {
    /// Scene preset: colorchart, sphere, or blob.
    #[arg(long)]
    preset: String,
    /// Output capture directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Gaussian image noise σ (fraction of full scale).
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Projector resolution as WxH.
    #[arg(long)]
    proj_res: Option<String>,
    /// Camera resolution as WxH.
    #[arg(long)]
    cam_res: Option<String>,
    #[arg(long)]
    projectors: Option<usize>,
    #[arg(long)]
    cameras: Option<usize>,
    /// Project the scene's reflectance field into the basis span.
    #[arg(long)]
    in_span: bool,
}

fn parse_res(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| Error::argument(format!("resolution must look like 320x240, got '{s}'")))?;
    Ok((
        w.parse().map_err(|_| Error::argument(format!("bad width '{w}'")))?,
        h.parse().map_err(|_| Error::argument(format!("bad height '{h}'")))?,
    ))
}

pub fn run(args: SynthArgs, config: &PipelineConfig) -> Result<()> {
    let overrides = SceneOverrides {
        n_projectors: args.projectors,
        n_cameras: args.cameras,
        proj_resolution: args.proj_res.as_deref().map(parse_res).transpose()?,
        cam_resolution: args.cam_res.as_deref().map(parse_res).transpose()?,
        noise_sigma: args.noise_sigma,
        seed: args.seed.or(Some(config.seed)),
        reflectance_in_span: args.in_span,
        ..Default::default()
    };
    let scene = build_scene(&args.preset, &overrides)?;
    let capture = render_capture(&scene)?;
    write_capture(&args.out, &scene, &capture)?;
    let frames: usize = capture.pairs.iter().map(|p| p.patterns.len() + p.colors.len()).sum();
    println!(
        "wrote {} pairs ({frames} frames) for preset '{}' to {}",
        capture.pairs.len(),
        scene.name,
        args.out.display()
    );
    Ok(())
}
