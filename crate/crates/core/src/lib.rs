//! Statevector simulation of quantum circuits with sparsity-aware gate fusion.
//!
//! The pipeline is: parse or generate a [`Circuit`], fuse it with
//! [`run_fusion`], then execute it on a [`Statevector`] with [`run_circuit`].
//! [`simulate`] does all three.

pub mod circuit;
pub mod cli;
pub mod error;
pub mod fusion;
pub mod gatecore;
pub mod kernel;
pub mod sim;
pub mod tile;

pub use circuit::{gen_benchmark, parse_circuit, serialize_circuit, BenchmarkKind, Circuit};
pub use error::{Error, Result};
pub use fusion::{run_fusion, CostModel, FusionConfig, FusionMode, FusionStats};
pub use gatecore::{Gate, GateMatrix, Tolerances};
pub use sim::{run_circuit, simulate, Precision, RunOptions, RunReport, Statevector};
