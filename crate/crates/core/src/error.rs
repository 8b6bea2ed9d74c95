use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QkdError {
    #[error("negative time bin index {0}")]
    NegativeBin(i64),
    #[error("polarization norm² {0} exceeds 1")]
    OverNormalized(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("angle {0} rad is not one of 0, ±π/4, π/2")]
    DisallowedAngle(f64),
    #[error("quarter-turn count {0} is not one of -1, 0, 1, 2")]
    DisallowedQuarterTurns(i64),
    #[error("phase {0} rad is not 0 or π")]
    DisallowedPhase(f64),
    #[error("state occupies bin {0}, expected bins 0 and 1 only")]
    BinOutOfRange(u32),
    #[error("angles ({0}, {1}) do not belong to {2}")]
    ClassMismatch(i8, i8, String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("detection event outside the decision table domain: bin {0}")]
    EventOutOfDomain(u8),
    #[error("no decision table for settings {0}")]
    MissingTable(String),
    #[error("logs misaligned: {0}")]
    MisalignedLogs(String),
    #[error("multi-photon input (norm² {0})")]
    MultiPhoton(f64),
    #[error("invalid channel parameter: {0}")]
    InvalidChannel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, QkdError>;
