use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("duplicate unit id `{0}`")]
    DuplicateUnit(String),

    #[error("unit `{unit}`, column `{column}`: negative value {value}")]
    NegativeValue {
        unit: String,
        column: String,
        value: f64,
    },

    #[error("unit `{unit}`, column `{column}`: cannot parse `{raw}` as a number")]
    Unparseable {
        unit: String,
        column: String,
        raw: String,
    },

    #[error("no unit has two strictly positive observations")]
    EmptyRatioSet,

    #[error("empty input")]
    EmptyInput,

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("k = {k} must be smaller than the number of points ({m})")]
    KTooLarge { k: usize, m: usize },

    #[error("subsample size q = {0} is too small (q >= 2 required)")]
    QTooSmall(usize),

    #[error("score vector `{0}` is constant; Kendall's tau is undefined")]
    DegenerateVector(String),

    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("non-finite value in input")]
    NonFinite,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

impl Error {
    /// True for errors caused by bad parameters rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParam(_)
                | Error::KTooLarge { .. }
                | Error::QTooSmall(_)
                | Error::MissingColumn(_)
                | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
