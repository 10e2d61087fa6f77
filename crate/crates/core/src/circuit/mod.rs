//! Circuits, the text file format, and the benchmark generators.

mod format;
mod gates;
mod generators;

use std::fmt;
use std::str::FromStr;

pub use format::{parse_circuit, serialize_circuit};
pub use gates::{matrix_gate, named_gate, signature, NAMED_GATES};
pub use generators::{gen_benchmark, MAX_GEN_DEPTH, MAX_GEN_QUBITS};

use crate::error::{Error, Result};
use crate::gatecore::{Gate, Tolerances};

/// An `n`-qubit circuit; gate order is application order.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidGate(
                "circuit needs at least one qubit".into(),
            ));
        }
        Ok(Circuit {
            n_qubits,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit::new(n_qubits)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if let Some(&q) = gate.targets().iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::InvalidGate(format!(
                "qubit {q} out of range for {} qubits",
                self.n_qubits
            )));
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Appends the named gate `name(params) operands...`.
    pub fn add(&mut self, name: &str, params: &[f64], operands: &[usize]) -> Result<()> {
        let g = named_gate(name, params, operands)?;
        self.push(g)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Sum of per-gate operation counts.
    pub fn total_op_count(&self, tol: Tolerances) -> u64 {
        self.gates.iter().map(|g| g.profile(tol).op_count).sum()
    }

    /// Largest gate size in the circuit.
    pub fn max_gate_size(&self) -> usize {
        self.gates.iter().map(Gate::k).max().unwrap_or(0)
    }
}

/// The six benchmark circuit families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkKind {
    /// Quantum Fourier transform.
    Qft,
    /// Alternating layered ansatz.
    Ala,
    /// Random quantum circuit.
    Rqc,
    /// Quantum volume circuit.
    Qvc,
    /// Instantaneous quantum polynomial circuit.
    Iqp,
    /// Hamiltonian evolution simulation (transverse-field Ising, Trotterized).
    Hes,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 6] = [
        BenchmarkKind::Qft,
        BenchmarkKind::Ala,
        BenchmarkKind::Rqc,
        BenchmarkKind::Qvc,
        BenchmarkKind::Iqp,
        BenchmarkKind::Hes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Qft => "qft",
            BenchmarkKind::Ala => "ala",
            BenchmarkKind::Rqc => "rqc",
            BenchmarkKind::Qvc => "qvc",
            BenchmarkKind::Iqp => "iqp",
            BenchmarkKind::Hes => "hes",
        }
    }

    /// Families dominated by diagonal, permutation, or otherwise sparse gates.
    pub fn is_sparse_class(self) -> bool {
        !matches!(self, BenchmarkKind::Ala | BenchmarkKind::Qvc)
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown benchmark kind `{s}` (expected one of qft, ala, rqc, qvc, iqp, hes)"
                ))
            })
    }
}
