use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the fusion/simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("targets {targets:?} are not a subset of {union:?}")]
    NotSubset {
        targets: Vec<usize>,
        union: Vec<usize>,
    },

    #[error("fused gate would act on {size} qubits, above the hard cap of {cap}")]
    FusionTooLarge { size: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cost model has no records for k={k}, threads={threads}")]
    CostLookup { k: usize, threads: usize },

    #[error("cost model file {path}: {message}")]
    CostModelFormat { path: PathBuf, message: String },

    #[error("cost model file not found: {0}")]
    CostModelNotFound(PathBuf),

    #[error("kernel: {0}")]
    Kernel(String),

    #[error("cannot allocate statevector of {n} qubits: {bytes} bytes required ({reason})")]
    Allocation {
        n: usize,
        bytes: u128,
        reason: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
