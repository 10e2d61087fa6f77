//! Lowering of named gates to explicit matrices.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gatecore::{Gate, GateLabel, GateMatrix};

/// Names accepted by the circuit parser.
pub const NAMED_GATES: &[&str] = &[
    "x", "y", "z", "h", "s", "sdg", "t", "tdg", "rx", "ry", "rz", "u3", "cx", "cz", "cp", "swap",
    "ccx",
];

/// `(qubit arity, parameter count)` of a named gate.
pub fn signature(name: &str) -> Option<(usize, usize)> {
    Some(match name {
        "x" | "y" | "z" | "h" | "s" | "sdg" | "t" | "tdg" => (1, 0),
        "rx" | "ry" | "rz" => (1, 1),
        "u3" => (1, 3),
        "cx" | "cz" | "swap" => (2, 0),
        "cp" => (2, 1),
        "ccx" => (3, 0),
        _ => return None,
    })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

fn one_qubit(m: [[Complex64; 2]; 2]) -> Vec<Complex64> {
    vec![m[0][0], m[0][1], m[1][0], m[1][1]]
}

fn diagonal(d: &[Complex64]) -> Vec<Complex64> {
    let dim = d.len();
    let mut e = vec![c(0.0, 0.0); dim * dim];
    for (i, v) in d.iter().enumerate() {
        e[i * dim + i] = *v;
    }
    e
}

fn permutation(dim: usize, f: impl Fn(usize) -> usize) -> Vec<Complex64> {
    let mut e = vec![c(0.0, 0.0); dim * dim];
    for col in 0..dim {
        e[f(col) * dim + col] = c(1.0, 0.0);
    }
    e
}

/// Matrix in operand order: bit `j` of an index belongs to `operands[j]`.
fn operand_matrix(name: &str, p: &[f64]) -> Vec<Complex64> {
    let z0 = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    match name {
        "x" => one_qubit([[z0, one], [one, z0]]),
        "y" => one_qubit([[z0, c(0.0, -1.0)], [c(0.0, 1.0), z0]]),
        "z" => diagonal(&[one, c(-1.0, 0.0)]),
        "h" => {
            let s = FRAC_1_SQRT_2;
            one_qubit([[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]])
        }
        "s" => diagonal(&[one, c(0.0, 1.0)]),
        "sdg" => diagonal(&[one, c(0.0, -1.0)]),
        "t" => diagonal(&[one, cis(FRAC_PI_4)]),
        "tdg" => diagonal(&[one, cis(-FRAC_PI_4)]),
        "rx" => {
            let (s, co) = (p[0] / 2.0).sin_cos();
            one_qubit([[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]])
        }
        "ry" => {
            let (s, co) = (p[0] / 2.0).sin_cos();
            one_qubit([[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]])
        }
        "rz" => diagonal(&[cis(-p[0] / 2.0), cis(p[0] / 2.0)]),
        "u3" => {
            let (theta, phi, lambda) = (p[0], p[1], p[2]);
            let (s, co) = (theta / 2.0).sin_cos();
            one_qubit([
                [c(co, 0.0), -cis(lambda) * s],
                [cis(phi) * s, cis(phi + lambda) * co],
            ])
        }
        // control = operand 0 (bit 0), target = operand 1 (bit 1)
        "cx" => permutation(4, |i| if i & 1 == 1 { i ^ 2 } else { i }),
        "cz" => diagonal(&[one, one, one, c(-1.0, 0.0)]),
        "cp" => diagonal(&[one, one, one, cis(p[0])]),
        "swap" => permutation(4, |i| ((i & 1) << 1) | ((i >> 1) & 1)),
        // controls = operands 0 and 1, target = operand 2
        "ccx" => permutation(8, |i| if i & 3 == 3 { i ^ 4 } else { i }),
        _ => unreachable!("signature() gates every name"),
    }
}

/// Re-indexes a matrix whose bit `j` belongs to `operands[j]` so that bit `j`
/// belongs to the `j`-th smallest operand.
pub(crate) fn sort_operands(
    operands: &[usize],
    entries: Vec<Complex64>,
) -> Result<(Vec<usize>, Vec<Complex64>)> {
    let mut sorted = operands.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidGate(format!(
            "repeated qubit in {operands:?}"
        )));
    }
    if sorted == operands {
        return Ok((sorted, entries));
    }
    // local bit j lives at sorted position dest[j]
    let dest: Vec<usize> = operands
        .iter()
        .map(|q| sorted.binary_search(q).expect("operand present"))
        .collect();
    let dim = 1usize << operands.len();
    let map = |x: usize| -> usize {
        dest.iter()
            .enumerate()
            .fold(0, |acc, (j, &d)| acc | (((x >> j) & 1) << d))
    };
    let mut out = vec![c(0.0, 0.0); dim * dim];
    for r in 0..dim {
        for col in 0..dim {
            out[map(r) * dim + map(col)] = entries[r * dim + col];
        }
    }
    Ok((sorted, out))
}

/// Builds the gate `name(params) operands...`.
pub fn named_gate(name: &str, params: &[f64], operands: &[usize]) -> Result<Gate> {
    let (arity, n_params) =
        signature(name).ok_or_else(|| Error::InvalidGate(format!("unknown gate `{name}`")))?;
    if operands.len() != arity {
        return Err(Error::InvalidGate(format!(
            "`{name}` takes {arity} qubit(s), got {}",
            operands.len()
        )));
    }
    if params.len() != n_params {
        return Err(Error::InvalidGate(format!(
            "`{name}` takes {n_params} parameter(s), got {}",
            params.len()
        )));
    }
    let (targets, entries) = sort_operands(operands, operand_matrix(name, params))?;
    let matrix = GateMatrix::new(targets.len(), entries)?;
    Ok(Gate::new(matrix, targets)?.with_label(GateLabel {
        name: name.to_string(),
        params: params.to_vec(),
        operands: operands.to_vec(),
    }))
}

/// Gate from an explicit matrix given in operand order.
pub fn matrix_gate(operands: &[usize], matrix: GateMatrix) -> Result<Gate> {
    if operands.len() != matrix.k() {
        return Err(Error::InvalidGate(format!(
            "{}-qubit matrix bound to {} qubits",
            matrix.k(),
            operands.len()
        )));
    }
    let (targets, entries) = sort_operands(operands, matrix.entries().to_vec())?;
    Gate::new(GateMatrix::new(targets.len(), entries)?, targets)
}
