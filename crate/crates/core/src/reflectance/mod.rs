//! Per-point spectral reflectance estimation from multi-pair multispectral
//! observations.
//!
//! With the shading factors fixed by geometry, the per-point cost — data
//! fidelity over the visible pairs plus a curvature penalty on the spectrum —
//! is a convex quadratic in the basis coefficients, so each point solves a
//! small linear system. The shading-ignoring single-pair baseline shares the
//! same machinery with the shading pinned to 1, which is exactly the ablation
//! that bakes shading into the recovered spectrum.

mod assemble;
mod bands;
mod solve;

pub use assemble::{assemble_observations, SamplePoint};
pub use bands::{select_bands, BandSelection};
pub use solve::{baseline_solve, solve_all, solve_point, ForwardOperator};

use crate::spectral::SpectralCurve;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// The stacked intensity vector one projector-camera pair measured for one
/// point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairObservation {
    /// Index into the capture's pair list.
    pub pair: usize,
    /// Linear intensities, illuminant-major, length `3·N_l`.
    pub y: Vec<f64>,
    /// Geometric shading factor of this pair at the point.
    pub shading: f64,
}

/// Result of one per-point solve.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub alpha: DVector<f64>,
    /// `B·α (+ mean)`; may leave `[0, 1]`, clipping is a display decision.
    pub reflectance: SpectralCurve,
    /// Final value of the per-point cost at the minimizer.
    pub residual: f64,
    pub pairs_used: usize,
    /// The normal equations were singular and the minimum-norm solution was
    /// taken (expected at γ = 0 with too few independent bands).
    pub rank_deficient: bool,
}
