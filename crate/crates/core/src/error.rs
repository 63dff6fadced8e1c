use thiserror::Error;

/// Errors raised by the geometry engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {point:?} lies outside the chart domain: {reason}")]
    Domain { point: Vec<f64>, reason: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("immersion degenerates at u = {u:?}: {reason}")]
    ImmersionDegenerate { u: Vec<f64>, reason: String },

    #[error("frame construction broke down at u = {u:?}: {reason}")]
    FrameDegenerate { u: Vec<f64>, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("finite-difference stencil at u = {u:?} leaves the parameter domain along axis {axis}")]
    Stencil { u: Vec<f64>, axis: usize },

    #[error("radius {radius} is outside the tube validity window (max admissible radius {max_radius})")]
    FocalRadius { radius: f64, max_radius: f64 },

    #[error("non-finite field value {value} at mesh node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("invalid descriptor: {0}")]
    Descriptor(String),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;
