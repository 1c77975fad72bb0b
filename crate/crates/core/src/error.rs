use thiserror::Error;

use crate::gf2::CosetIntersection;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("generator matrix is rank deficient: rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no disjoint offsets found after {tries} tries (last certificate: {last})")]
    OffsetSearchFailed { tries: usize, last: CosetIntersection },

    #[error("codebooks intersect ({0}); refusing to build a UMP code without an explicit overlap opt-in")]
    Overlap(CosetIntersection),

    #[error("SNR bracket [{lo_db}, {hi_db}] dB does not contain the threshold: {reason}")]
    Bracket { lo_db: f64, hi_db: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
