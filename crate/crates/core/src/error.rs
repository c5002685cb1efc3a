use thiserror::Error;

use crate::geometry::GeometryError;
use crate::realmath::FixedError;

/// Per-frame tracking failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("only {found} matched control points, need at least {required}")]
    InsufficientMeasurements { found: usize, required: usize },
    #[error("degenerate measurement geometry: pose is not observable")]
    DegenerateGeometry,
    #[error("edge normal is not unit length (|n| = {norm})")]
    NonUnitNormal { norm: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("numeric fault in fixed-point backend: {0}")]
    Numeric(#[from] FixedError),
}
