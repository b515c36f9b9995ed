//! CSV serialization for curves and basis models.
//!
//! Curves: header `wavelength_nm,value`, one row per sample. Basis models: a
//! one-line JSON header comment carrying the grid, then one row per
//! wavelength with the basis columns (and the mean as a final column when
//! present).

use super::{BasisModel, SpectralCurve, WavelengthGrid};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub fn write_curve_csv(path: &Path, curve: &SpectralCurve) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "wavelength_nm,value")?;
    for (w, v) in curve.grid.wavelengths().zip(&curve.values) {
        writeln!(f, "{w},{v}")?;
    }
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<SpectralCurve> {
    let parse_err = |msg: &str| Error::Parse { path: path.display().to_string(), msg: msg.to_string() };
    let f = std::fs::File::open(path)?;
    let mut wavelengths = Vec::new();
    let mut values = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("wavelength")) {
            continue;
        }
        let (w, v) = line.split_once(',').ok_or_else(|| parse_err("expected two columns"))?;
        wavelengths.push(w.trim().parse::<f64>().map_err(|e| parse_err(&e.to_string()))?);
        values.push(v.trim().parse::<f64>().map_err(|e| parse_err(&e.to_string()))?);
    }
    if wavelengths.len() < 3 {
        return Err(parse_err("curve needs at least 3 samples"));
    }
    let step = wavelengths[1] - wavelengths[0];
    for pair in wavelengths.windows(2) {
        if ((pair[1] - pair[0]) - step).abs() > 1e-9 {
            return Err(parse_err("wavelengths are not uniformly spaced"));
        }
    }
    let grid = WavelengthGrid::new(wavelengths[0], step, wavelengths.len())?;
    SpectralCurve::new(grid, values)
}

#[derive(Serialize, Deserialize)]
struct BasisHeader {
    grid: WavelengthGrid,
    n_basis: usize,
    mean_column: bool,
}

pub fn write_basis_csv(path: &Path, model: &BasisModel) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let header = BasisHeader {
        grid: model.grid,
        n_basis: model.n_basis(),
        mean_column: model.mean.is_some(),
    };
    writeln!(f, "# {}", serde_json::to_string(&header)?)?;
    for i in 0..model.grid.count {
        let mut fields: Vec<String> =
            (0..model.n_basis()).map(|k| model.basis[(i, k)].to_string()).collect();
        if let Some(mean) = &model.mean {
            fields.push(mean.values[i].to_string());
        }
        writeln!(f, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn read_basis_csv(path: &Path) -> Result<BasisModel> {
    let parse_err = |msg: String| Error::Parse { path: path.display().to_string(), msg };
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines.next().ok_or_else(|| parse_err("empty file".to_string()))?;
    let json = header_line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| parse_err("missing JSON header comment".to_string()))?;
    let header: BasisHeader = serde_json::from_str(json.trim())?;

    let mut basis = nalgebra::DMatrix::zeros(header.grid.count, header.n_basis);
    let mut mean_values = vec![0.0; header.grid.count];
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        if i >= header.grid.count {
            return Err(parse_err("more rows than grid samples".to_string()));
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = header.n_basis + usize::from(header.mean_column);
        if fields.len() != expected {
            return Err(parse_err(format!("row {i} has {} fields, expected {expected}", fields.len())));
        }
        for k in 0..header.n_basis {
            basis[(i, k)] = fields[k].trim().parse().map_err(|e| parse_err(format!("{e}")))?;
        }
        if header.mean_column {
            mean_values[i] =
                fields[header.n_basis].trim().parse().map_err(|e| parse_err(format!("{e}")))?;
        }
        rows += 1;
    }
    if rows != header.grid.count {
        return Err(parse_err(format!("{rows} rows, expected {}", header.grid.count)));
    }
    let mean = if header.mean_column {
        Some(SpectralCurve::new(header.grid, mean_values)?)
    } else {
        None
    };
    // explained variance is a fit artifact, not part of the serialized model
    Ok(BasisModel { grid: header.grid, basis, mean, explained_variance: Vec::new() })
}
