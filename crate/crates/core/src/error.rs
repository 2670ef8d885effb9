use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    #[error("invalid quadrature request: {0}")]
    InvalidQuadrature(String),

    /// The body boundary crosses a cell in a way the cut-cell integration
    /// cannot represent (an edge cut twice, a body inside a single cell, ...).
    #[error("geometry under-resolved at t = {t}: cell {cell}: {reason}")]
    GeometryUnderResolved { t: f64, cell: usize, reason: String },

    #[error("inconsistent cut geometry in cell {cell}: {reason}")]
    GeometryInconsistent { cell: usize, reason: String },

    #[error("level set gradient vanishes at ({x}, {y})")]
    DegenerateLevelSet { x: f64, y: f64 },

    #[error("cut cell {0} has an empty fluid portion")]
    EmptyFluidPortion(usize),

    #[error("no quadrature table for cut cell {0}")]
    MissingQuadrature(usize),

    #[error("rigid body {0}")]
    Body(String),

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:.3e}): {reason}")]
    NewtonDivergence {
        iterations: usize,
        residual: f64,
        reason: String,
        history: Vec<f64>,
    },

    #[error("time slab {slab}: {source}")]
    Slab {
        slab: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("postprocessing: {0}")]
    Postprocess(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_slab(self, slab: usize) -> Self {
        match self {
            e @ Error::Slab { .. } => e,
            other => Error::Slab {
                slab,
                source: Box::new(other),
            },
        }
    }
}
