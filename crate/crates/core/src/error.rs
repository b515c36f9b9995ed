//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Quantities that must share a wavelength grid (or image layout) do not.
    #[error("configuration mismatch: {0}")]
    Config(String),

    /// A caller-supplied value is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A point has nonpositive depth in the device frame.
    #[error("point behind {kind} (depth {depth})")]
    BehindCamera { kind: &'static str, depth: f64 },

    /// Rays are parallel, baselines are zero, correspondences are collinear.
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    /// Two-view bootstrap could not produce a valid relative pose.
    #[error("initialization failed: {0}")]
    Initialization(String),

    /// A view could not be registered against the current reconstruction.
    #[error("registration failed: {0}")]
    Registration(String),

    /// The optimizer could not decrease the cost.
    #[error("optimization diverged: {0}")]
    Optimization(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
