use thiserror::Error;

use crate::aig::AigerError;

/// Errors surfaced by the synthesis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("aiger: {0}")]
    Aiger(#[from] AigerError),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("primary input count mismatch: expected {expected}, found {found}")]
    PiMismatch { expected: usize, found: usize },
    #[error("primary output count mismatch: expected {expected}, found {found}")]
    PoMismatch { expected: usize, found: usize },
    #[error("applying the change to node {target} would create a combinational loop")]
    LoopIntroduced { target: u32 },
    #[error("{num_pis} primary inputs exceed the exhaustive limit of {limit}")]
    ExhaustiveLimit { num_pis: usize, limit: usize },
    #[error("output word width mismatch: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("invalid bound: {0}")]
    Bound(String),
    #[error("pattern pool: {0}")]
    Pattern(String),
    #[error("simulation states were built over different pattern pools")]
    PoolMismatch,
    #[error("configuration: {0}")]
    Config(String),
    #[error("final certification found a pattern violating the bound")]
    CertificationFailed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
