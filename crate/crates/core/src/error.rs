use thiserror::Error;

use crate::population::CellId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Positive signal mass with zero (regularized) background.
    #[error("infinite AMS: s = {s} with zero background mass")]
    InfiniteAms { s: f64 },

    /// A gradient was requested on the boundary of the rate domain.
    #[error("AMS gradient undefined at boundary point (s = {s}, b = {b})")]
    BoundaryPoint { s: f64, b: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid population: {0}")]
    InvalidPopulation(String),

    #[error("cell {0} has no entry")]
    MissingCell(CellId),

    #[error("cell {0} has one-sided label counts and zero smoothing (infinite score)")]
    InfiniteScore(CellId),

    #[error("population has {cells} cells; enumeration is capped at {max}")]
    TooManyCells { cells: usize, max: usize },

    /// The optimum has s* = 0 or b* = 0 so the bound constants are undefined.
    #[error("degenerate optimum (s* = {s}, b* = {b})")]
    DegenerateOptimum { s: f64, b: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
