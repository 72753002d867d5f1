use thiserror::Error;

use crate::grid::CubeId;

#[derive(Debug, Error)]
pub enum Error {
    /// A cube level or index lies outside the padded grid.
    #[error("cube {cube} is outside the padded grid (levels {min_level}..={max_level})")]
    Range {
        cube: CubeId,
        min_level: i32,
        max_level: i32,
    },

    /// Two objects that must live on the same grid do not.
    #[error("grid mismatch: {0}")]
    Structural(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The brute-force oracle refuses instances above its size guard.
    #[error("instance too large for the brute-force oracle ({cells} cells > {limit}); use opnorm_ascent")]
    Guard { cells: usize, limit: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
