use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical quantity outside its domain (negative photon number, gain below unity, ...).
    #[error("{name} = {value} is outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("frequency grid is not symmetric about the resonance: {0}")]
    AsymmetricGrid(String),

    #[error("band [{lo}, {hi}] Hz exceeds the grid extent [{grid_lo}, {grid_hi}] Hz")]
    BandOutsideGrid { lo: f64, hi: f64, grid_lo: f64, grid_hi: f64 },

    /// A malformed dataset row (1-based, counting the header as row 1).
    #[error("dataset row {row}: {message}")]
    Dataset { row: usize, message: String },

    #[error("quadrature did not converge: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("normal equations are singular (rank {rank} < {params} parameters)")]
    Singular { rank: usize, params: usize },

    #[error("underdetermined fit: {points} points for {params} parameters")]
    Underdetermined { points: usize, params: usize },

    #[error("fit did not converge")]
    NotConverged,

    #[error("{stage}: {source}")]
    Stage { stage: String, source: Box<Error> },
}

impl Error {
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error behind any stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain { name, value, reason }
    }
}
