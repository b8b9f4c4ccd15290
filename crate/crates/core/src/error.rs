use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the forward engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported gmsh element type {0}")]
    UnsupportedElement(u32),
    #[error("element {element} references vertex {vertex} but the mesh has {count} vertices")]
    VertexIndexOutOfRange {
        element: usize,
        vertex: usize,
        count: usize,
    },
    #[error("no conductivity given for region tag {0}")]
    UnknownRegion(i32),
    #[error("element {0} has non-positive volume")]
    DegenerateElement(usize),
    #[error("invalid conductivity tensor: {0}")]
    InvalidConductivity(String),
    #[error("invalid sphere model: {0}")]
    InvalidModel(String),
    #[error("no voxel center lies inside the sphere at h = {0} mm")]
    EmptyVoxelMesh(f64),
    #[error("operation requires a {expected} mesh")]
    WrongElementKind { expected: &'static str },
    #[error("point ({0:.6e}, {1:.6e}, {2:.6e}) is outside the mesh")]
    OutsideMesh(f64, f64, f64),
    #[error("point lies on the boundary of element {0}; containment is ambiguous")]
    AmbiguousContainment(usize),
    #[error("conductivity is not constant around the source: element {0} differs from the source element")]
    NonConstantSourceConductivity(usize),
    #[error("evaluation too close to the dipole (distance {0:e} m)")]
    AtSingularity(f64),
    #[error("quadrature order {0} exceeds the supported maximum of {max}", max = crate::quadrature::MAX_ORDER)]
    OrderTooHigh(usize),
    #[error("distance/edge ratio {0} is below the validity bound 1/6 of the patch-order rule")]
    RatioOutOfValidity(f64),
    #[error("tetrahedral EEG terms use the analytic path and have no fixed quadrature order")]
    AnalyticPathOnly,
    #[error("the conductivity at the source must be isotropic for this term")]
    AnisotropicSource,
    #[error("source lies inside or on the integration domain")]
    SourceInDomain,
    #[error("right-hand side is not zero-sum (relative sum {0:e})")]
    NotZeroSum(f64),
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("series did not converge: last term ratio {0:e}")]
    SeriesNoConvergence(f64),
    #[error("coil {0} lies inside the mesh")]
    CoilInsideMesh(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("zero reference norm")]
    ZeroReference,
    #[error("empty input")]
    Empty,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than numerical trouble.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::UnsupportedElement(_)
                | Error::VertexIndexOutOfRange { .. }
                | Error::UnknownRegion(_)
                | Error::InvalidConductivity(_)
                | Error::InvalidModel(_)
                | Error::EmptyVoxelMesh(_)
                | Error::Config(_)
                | Error::Json(_)
                | Error::OrderTooHigh(_)
        )
    }
}
