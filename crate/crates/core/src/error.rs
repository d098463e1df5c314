//! Error type shared by every module.

use thiserror::Error;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("class {label} has no samples")]
    EmptyClass { label: u8 },
    #[error("invalid partition size: n0g={n0g} with n0={n0} (need 1 <= n0g <= n0-1)")]
    InvalidPartitionSize { n0g: usize, n0: usize },
    #[error("split probabilities must be nonnegative and sum to 1, got {0:?}")]
    BadProbabilities([f64; 3]),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("label at row {row} is {value:?}, expected 0 or 1")]
    BadLabel { row: usize, value: String },
    #[error("idx format error: {0}")]
    IdxFormat(String),
    #[error("image count {images} differs from label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("generator needs at least {need} source rows, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("neighbour count k={k} invalid for {n} source rows")]
    BadK { k: usize, n: usize },
    #[error("unknown generator {0:?}")]
    UnknownGenerator(String),

    #[error("probability is NaN")]
    NonFinite,
    #[error("majority correction set is empty")]
    EmptyCorrectionSet,
    #[error("synthetic set is empty")]
    EmptySynthetic,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("training diverged to a non-finite loss at epoch {epoch}")]
    DivergedToNonFinite { epoch: usize },
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("invalid training configuration: {0}")]
    BadTrainConfig(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("F-beta weight must be positive, got {0}")]
    BadBeta(f64),
    #[error("columns are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),

    #[error("rank cap {d_minus} invalid for a {d}x{k} coefficient matrix")]
    RankCapTooLarge { d_minus: usize, d: usize, k: usize },
    #[error("coefficient matrix spectrum is numerically zero")]
    DegenerateSpectrum,
    #[error("task {index}: {source}")]
    Task {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("design matrix is singular")]
    SingularDesign,
    #[error("propensity clip {0} outside (0, 0.5)")]
    BadClip(f64),
    #[error("causal dataset invalid: {0}")]
    InvalidCausal(String),

    #[error("invalid distribution parameter: {0}")]
    BadDistParam(String),
    #[error("draw left a class empty twice in a row")]
    DegenerateDraw,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Task { source, .. } | Replicate { source, .. } => source.kind(),
            BadProbabilities(_) | BadK { .. } | UnknownGenerator(_) | BadThreshold(_)
            | BadTrainConfig(_) | BadBeta(_) | RankCapTooLarge { .. } | BadClip(_)
            | BadDistParam(_) | Config(_) | InvalidPartitionSize { .. } => ErrorKind::Config,
            EmptyClass { .. } | Parse { .. } | BadLabel { .. } | IdxFormat(_)
            | CountMismatch { .. } | InvalidDataset(_) | Io(_) | TooFewSamples { .. }
            | EmptyCorrectionSet | EmptySynthetic | DimMismatch { .. }
            | LengthMismatch { .. } | ShapeMismatch(..) | InvalidCausal(_) | DegenerateDraw => {
                ErrorKind::Data
            }
            NonFinite | DivergedToNonFinite { .. } | NotOrthonormal(_) | DegenerateSpectrum
            | SingularDesign => ErrorKind::Numeric,
        }
    }

    pub(crate) fn in_task(self, index: usize) -> Error {
        Error::Task { index, source: Box::new(self) }
    }

    pub(crate) fn in_replicate(self, replicate: usize) -> Error {
        Error::Replicate { replicate, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
