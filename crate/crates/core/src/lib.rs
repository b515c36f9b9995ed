//! Self-calibrating projector-camera 3D scanning with spectral reflectance.
//!
//! The pipeline reconstructs an object from gray-code structured light captured
//! while a projector and a camera are alternately moved around it, then estimates
//! per-point spectral reflectance from uniform color illuminations, using the
//! recovered projector positions to factor shading out of the measurements.
//!
//! Stages, in dataflow order:
//!
//! 1. [`graycode`] — pattern generation, per-pixel decoding, sub-pixel features.
//! 2. [`sfm`] — feature tracks across all devices, incremental reconstruction,
//!    projector-weighted bundle adjustment.
//! 3. [`geom`] — camera/projector model, normals, near-light shading, visibility.
//! 4. [`spectral`] — wavelength-sampled curves, the image-formation model, PCA basis.
//! 5. [`reflectance`] — per-point basis-coefficient estimation and band selection.
//! 6. [`synth`] — ground-truth scene construction and forward rendering; the
//!    oracle every end-to-end test is checked against.

pub mod config;
pub mod error;
pub mod geom;
pub mod graycode;
pub mod img;
pub mod ply;
pub mod reflectance;
pub mod relight;
pub mod sfm;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
