use crate::common;
use clap::Args;
use nalgebra::Point3;
use procam::config::PipelineConfig;
use procam::error::{Error, Result};
use procam::geom::{estimate_normals, visible_pair_set, RayCaster};
use procam::ply::{write_point_cloud, PointCloud};
use procam::reflectance::{
    assemble_observations, baseline_solve, solve_all, SamplePoint, SpectralEstimate,
};
use procam::sfm::read_reconstruction_json;
use procam::spectral::reflectance_to_srgb;
use procam::synth::read_capture;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

#[derive(Args)]
pub struct SpectraArgs {
    #[arg(long)]
    capture: PathBuf,
    /// reconstruction.json from `reconstruct`.
    #[arg(long)]
    reconstruction: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Spectral smoothness weight.
    #[arg(long)]
    gamma: Option<f64>,
    /// Occluder mesh for visibility; defaults to the capture's ground-truth
    /// mesh (stand-in for a reconstructed surface).
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Keep the reconstruction's own gauge instead of aligning to the
    /// ground-truth frame (required when no sidecar exists).
    #[arg(long)]
    no_align_gt: bool,
    /// Shading-ignoring single-pair estimation (the ablation baseline).
    #[arg(long)]
    baseline: bool,
    /// Pair index the baseline samples (default: each point's first visible).
    #[arg(long)]
    baseline_pair: Option<usize>,
}

#[derive(Serialize)]
struct SpectraReport {
    points_total: usize,
    estimated: usize,
    unestimated: usize,
    gamma: f64,
    baseline: bool,
    residual_histogram: Vec<(String, usize)>,
    pairs_used_histogram: BTreeMap<usize, usize>,
}

pub fn run(args: SpectraArgs, config: &PipelineConfig) -> Result<()> {
    let capture = read_capture(&args.capture)?;
    if !args.reconstruction.exists() {
        return Err(Error::config(format!(
            "missing reconstruction {}",
            args.reconstruction.display()
        )));
    }
    let mut state = read_reconstruction_json(&args.reconstruction)?;

    // visibility runs against the mesh frame, so bring the gauge there
    let gt_views_path = args.capture.join("ground_truth/views.json");
    if !args.no_align_gt && gt_views_path.exists() {
        let gt_views = capture.ground_truth_views()?;
        let sim = common::gauge_to_ground_truth(&state, &gt_views)?;
        common::apply_gauge(&mut state, &sim);
        println!("aligned reconstruction to ground-truth frame (scale {:.6})", sim.scale);
    }

    let mesh = match &args.mesh {
        Some(p) => procam::ply::read_mesh(p)?,
        None => capture.ground_truth_mesh()?,
    };
    let caster = RayCaster::new(&mesh);
    let eps = config.visibility_eps_scale * mesh.bbox_diagonal();

    // points with their per-camera track positions
    let mut positions: Vec<Point3<f64>> = Vec::new();
    let mut track_positions: Vec<BTreeMap<_, _>> = Vec::new();
    for t in &state.tracks {
        let Some(p) = t.point else { continue };
        positions.push(p);
        track_positions.push(
            t.track
                .observations
                .iter()
                .filter(|o| state.views[o.view.0].registered)
                .map(|o| (o.view, o.position))
                .collect(),
        );
    }
    if positions.is_empty() {
        return Err(Error::Degenerate("reconstruction has no points".to_string()));
    }

    let viewpoints: Vec<Point3<f64>> = state
        .views
        .iter()
        .filter(|v| v.registered)
        .map(|v| v.view.pose.center())
        .collect();
    let k = config.normal_k.min(positions.len().saturating_sub(1)).max(3);
    let oriented = estimate_normals(&positions, k, &viewpoints)?;

    let pairs = common::registered_pairs(&capture, &state);
    let pair_views: Vec<(&procam::geom::DeviceView, &procam::geom::DeviceView)> = pairs
        .iter()
        .map(|(_, (proj, cam))| (&state.views[proj.0].view, &state.views[cam.0].view))
        .collect();
    let visible = visible_pair_set(&oriented, &pair_views, &caster, eps);

    let samples: Vec<SamplePoint> = oriented
        .iter()
        .zip(&track_positions)
        .map(|(point, positions)| SamplePoint { point: *point, positions: positions.clone() })
        .collect();
    let pair_ids: Vec<_> = pairs.iter().map(|(_, ids)| *ids).collect();
    let views: Vec<procam::geom::DeviceView> =
        state.views.iter().map(|v| v.view.clone()).collect();
    let colors: Vec<_> = pairs.iter().map(|(idx, _)| capture.colors[*idx].clone()).collect();
    let observations = assemble_observations(&samples, &pair_ids, &views, &visible, &colors)?;

    let gamma = args.gamma.unwrap_or(config.gamma);
    let mut cfg = config.clone();
    cfg.gamma = gamma;
    let op = common::operator_for_capture(&capture, &cfg)?;

    let estimates: Vec<Option<SpectralEstimate>> = if args.baseline {
        observations
            .iter()
            .map(|obs| {
                let chosen = match args.baseline_pair {
                    Some(p) => obs.iter().find(|o| o.pair == p),
                    None => obs.first(),
                };
                chosen.and_then(|o| baseline_solve(&op, o, None, None).ok())
            })
            .collect()
    } else {
        solve_all(&op, &observations)
    };

    write_outputs(&args.out, &capture, &oriented, &estimates, &observations, gamma, args.baseline)?;
    Ok(())
}

fn write_outputs(
    out: &PathBuf,
    capture: &procam::synth::LoadedCapture,
    oriented: &[procam::geom::OrientedPoint],
    estimates: &[Option<SpectralEstimate>],
    observations: &[Vec<procam::reflectance::PairObservation>],
    gamma: f64,
    baseline: bool,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let grid = capture.manifest.grid;
    let white = capture.illuminations()?.illuminants[6].clone();

    let mut cloud = PointCloud::default();
    let mut spectra_rows = Vec::new();
    let mut colors = Vec::new();
    let mut csv = std::fs::File::create(out.join("spectra.csv"))?;
    write!(csv, "point")?;
    for w in grid.wavelengths() {
        write!(csv, ",r_{}", w.round() as i64)?;
    }
    writeln!(csv)?;

    let mut estimated = 0;
    let mut residuals = Vec::new();
    let mut pairs_hist: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, (point, est)) in oriented.iter().zip(estimates).enumerate() {
        let Some(est) = est else { continue };
        estimated += 1;
        residuals.push(est.residual);
        *pairs_hist.entry(est.pairs_used).or_insert(0) += 1;

        cloud.positions.push(point.position);
        cloud.normals.push(*point.normal.as_ref());
        spectra_rows.push(est.reflectance.values.iter().map(|v| *v as f32).collect::<Vec<f32>>());
        let rgb = reflectance_to_srgb(&est.reflectance, &white)?;
        colors.push([
            (rgb[0] * 255.0).round() as u8,
            (rgb[1] * 255.0).round() as u8,
            (rgb[2] * 255.0).round() as u8,
        ]);

        write!(csv, "{i}")?;
        for v in &est.reflectance.values {
            write!(csv, ",{v:.6}")?;
        }
        writeln!(csv)?;
    }
    cloud.reflectance = Some((grid, spectra_rows));
    cloud.colors = Some(colors);
    write_point_cloud(&out.join("spectra.ply"), &cloud)?;

    // residual histogram on a log scale
    let histogram = {
        let mut bins: BTreeMap<i32, usize> = BTreeMap::new();
        for r in &residuals {
            let bin = if *r <= 0.0 { -20 } else { r.log10().floor() as i32 };
            *bins.entry(bin).or_insert(0) += 1;
        }
        bins.into_iter().map(|(b, n)| (format!("1e{b}"), n)).collect()
    };
    let report = SpectraReport {
        points_total: oriented.len(),
        estimated,
        unestimated: oriented.len() - estimated,
        gamma,
        baseline,
        residual_histogram: histogram,
        pairs_used_histogram: pairs_hist,
    };
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    let _ = observations;
    println!(
        "estimated {estimated}/{} points (unestimated {}), outputs in {}",
        oriented.len(),
        oriented.len() - estimated,
        out.display()
    );
    Ok(())
}
