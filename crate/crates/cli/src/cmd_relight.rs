use clap::Args;
use nalgebra::{Point3, Unit};
use procam::config::PipelineConfig;
use procam::error::{Error, Result};
use procam::geom::OrientedPoint;
use procam::img::{write_pfm_rgb, write_ppm8, RgbImage};
use procam::ply::read_point_cloud;
use procam::relight::{point_radiance, render_relit, PointLight};
use procam::spectral::{read_curve_csv, SpectralCurve};
use procam::synth::read_capture;
use std::path::PathBuf;

#[derive(Args)]
pub struct RelightArgs {
    /// Spectral point cloud from `spectra` (positions, normals, reflectance).
    #[arg(long)]
    spectra: PathBuf,
    /// Capture directory providing the sensitivity, grid, and named views.
    #[arg(long)]
    capture: PathBuf,
    /// Render from this ground-truth view id.
    #[arg(long)]
    view: usize,
    /// Light spec `x,y,z` or `x,y,z@spectrum.csv`; repeatable, contributions
    /// add. Without `@file` the light takes the capture's white illumination.
    #[arg(long = "light", required = true)]
    lights: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Splat radius in pixels.
    #[arg(long, default_value_t = 2.0)]
    splat_radius: f64,
    /// Compare against a captured color frame (PFM) and report mean absolute
    /// error over the relit points.
    #[arg(long)]
    compare: Option<PathBuf>,
}

fn parse_light(spec: &str, grid: &procam::spectral::WavelengthGrid, white: &SpectralCurve) -> Result<PointLight> {
    let (pos_str, spectrum) = match spec.split_once('@') {
        Some((p, file)) => (p, read_curve_csv(std::path::Path::new(file))?.resample(grid)),
        None => (spec, white.clone()),
    };
    let coords: Vec<f64> = pos_str
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::argument(format!("bad light position '{pos_str}'"))))
        .collect::<Result<_>>()?;
    if coords.len() != 3 {
        return Err(Error::argument(format!("light position needs 3 coordinates, got '{pos_str}'")));
    }
    Ok(PointLight { position: Point3::new(coords[0], coords[1], coords[2]), spectrum })
}

pub fn run(args: RelightArgs, _config: &PipelineConfig) -> Result<()> {
    let capture = read_capture(&args.capture)?;
    let grid = capture.manifest.grid;
    let sens = capture.sensitivity()?;
    let white = capture.illuminations()?.illuminants[6].clone();

    let cloud = read_point_cloud(&args.spectra)?;
    let (cloud_grid, rows) = cloud
        .reflectance
        .as_ref()
        .ok_or_else(|| Error::config("spectra PLY carries no reflectance payload".to_string()))?;
    let points: Vec<OrientedPoint> = cloud
        .positions
        .iter()
        .zip(&cloud.normals)
        .map(|(p, n)| OrientedPoint { position: *p, normal: Unit::new_normalize(*n) })
        .collect();
    let reflectances: Vec<SpectralCurve> = rows
        .iter()
        .map(|r| {
            SpectralCurve::new(*cloud_grid, r.iter().map(|v| *v as f64).collect())
                .map(|c| c.resample(&grid))
        })
        .collect::<Result<_>>()?;

    let lights: Vec<PointLight> =
        args.lights.iter().map(|s| parse_light(s, &grid, &white)).collect::<Result<_>>()?;

    let gt_views = capture.ground_truth_views()?;
    let view = gt_views
        .iter()
        .find(|v| v.id.0 == args.view)
        .ok_or_else(|| Error::argument(format!("capture has no view {}", args.view)))?;

    let img = render_relit(&points, &reflectances, &lights, &sens, view, args.splat_radius, None)?;
    std::fs::create_dir_all(&args.out)?;
    write_pfm_rgb(&args.out.join("relit.pfm"), &img)?;
    write_ppm8(&args.out.join("relit_preview.ppm"), &srgb_preview(&img))?;
    println!("wrote relit view {} with {} lights to {}", args.view, lights.len(), args.out.display());

    if let Some(reference_path) = &args.compare {
        let reference = procam::img::read_pfm_rgb(reference_path)?;
        let mut total = 0.0;
        let mut count = 0usize;
        for (point, refl) in points.iter().zip(&reflectances) {
            let Ok((u, v)) = procam::geom::project(view, &point.position) else { continue };
            if u < 0.0
                || u >= view.intrinsics.width as f64
                || v < 0.0
                || v >= view.intrinsics.height as f64
            {
                continue;
            }
            let predicted = point_radiance(point, refl, &lights, &sens, None)?;
            let sampled = reference.sample_bilinear(u, v);
            for m in 0..3 {
                total += (predicted[m] - sampled[m]).abs();
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Degenerate("no points project into the comparison view".to_string()));
        }
        println!("mean absolute error vs reference: {:.6} over {} samples", total / count as f64, count);
    }
    Ok(())
}

/// Quick gamma preview for the PPM companion output.
fn srgb_preview(img: &RgbImage) -> RgbImage {
    let mut out = img.clone();
    for v in &mut out.data {
        let lin = (*v).clamp(0.0, 1.0) as f64;
        *v = if lin <= 0.0031308 { 12.92 * lin } else { 1.055 * lin.powf(1.0 / 2.4) - 0.055 } as f32;
    }
    out
}
