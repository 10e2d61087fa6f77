//! Deterministic generators for the six benchmark families.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`; ChaCha8 output is
//! specified by its algorithm, so a seed produces the same circuit on every
//! platform and release.

use std::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gates::matrix_gate;
use super::{BenchmarkKind, Circuit};
use crate::error::{Error, Result};
use crate::gatecore::random_unitary;

pub const MAX_GEN_QUBITS: usize = 40;
pub const MAX_GEN_DEPTH: usize = 100_000;

// transverse-field Ising parameters for the HES family
const ISING_J: f64 = 1.0;
const ISING_H: f64 = 1.0;
const TROTTER_DT: f64 = 0.1;

/// Generates a benchmark circuit. `depth` is ignored for QFT and `seed` is
/// ignored for QFT and HES, which are fully determined by their size.
pub fn gen_benchmark(kind: BenchmarkKind, n: usize, depth: usize, seed: u64) -> Result<Circuit> {
    if !(2..=MAX_GEN_QUBITS).contains(&n) {
        return Err(Error::Config(format!(
            "benchmark qubit count must be in 2..={MAX_GEN_QUBITS}, got {n}"
        )));
    }
    if kind != BenchmarkKind::Qft && !(1..=MAX_GEN_DEPTH).contains(&depth) {
        return Err(Error::Config(format!(
            "benchmark depth must be in 1..={MAX_GEN_DEPTH}, got {depth}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Circuit::new(n)?;
    match kind {
        BenchmarkKind::Qft => qft(&mut c)?,
        BenchmarkKind::Ala => ala(&mut c, depth, &mut rng)?,
        BenchmarkKind::Rqc => rqc(&mut c, depth, &mut rng)?,
        BenchmarkKind::Qvc => qvc(&mut c, depth, &mut rng)?,
        BenchmarkKind::Iqp => iqp(&mut c, depth, &mut rng)?,
        BenchmarkKind::Hes => hes(&mut c, depth)?,
    }
    Ok(c)
}

fn qft(c: &mut Circuit) -> Result<()> {
    let n = c.n_qubits();
    for i in 0..n {
        c.add("h", &[], &[i])?;
        for j in i + 1..n {
            c.add("cp", &[PI / (1u64 << (j - i)) as f64], &[j, i])?;
        }
    }
    for i in 0..n / 2 {
        c.add("swap", &[], &[i, n - 1 - i])?;
    }
    Ok(())
}

fn brickwork_cz(c: &mut Circuit, offset: usize) -> Result<()> {
    for i in (offset..c.n_qubits().saturating_sub(1)).step_by(2) {
        c.add("cz", &[], &[i, i + 1])?;
    }
    Ok(())
}

fn ala(c: &mut Circuit, depth: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    for layer in 0..depth {
        for q in 0..c.n_qubits() {
            let angles = [
                rng.random_range(0.0..PI),
                rng.random_range(0.0..TAU),
                rng.random_range(0.0..TAU),
            ];
            c.add("u3", &angles, &[q])?;
        }
        brickwork_cz(c, layer % 2)?;
    }
    Ok(())
}

fn rqc(c: &mut Circuit, depth: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    for _ in 0..depth {
        for q in 0..c.n_qubits() {
            match rng.random_range(0..3) {
                0 => c.add("rx", &[PI / 2.0], &[q])?,
                1 => c.add("ry", &[PI / 2.0], &[q])?,
                _ => c.add("t", &[], &[q])?,
            }
        }
        brickwork_cz(c, rng.random_range(0..2))?;
    }
    Ok(())
}

fn qvc(c: &mut Circuit, depth: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut perm: Vec<usize> = (0..c.n_qubits()).collect();
    for _ in 0..depth {
        perm.shuffle(rng);
        for pair in perm.chunks_exact(2) {
            let u = random_unitary(2, rng);
            c.push(matrix_gate(pair, u)?)?;
        }
    }
    Ok(())
}

fn iqp(c: &mut Circuit, depth: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    let n = c.n_qubits();
    for q in 0..n {
        c.add("h", &[], &[q])?;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..depth {
        for q in 0..n {
            match rng.random_range(0..3) {
                0 => c.add("t", &[], &[q])?,
                1 => c.add("z", &[], &[q])?,
                _ => {}
            }
        }
        perm.shuffle(rng);
        for pair in perm.chunks_exact(2) {
            if rng.random_bool(0.5) {
                c.add("cz", &[], pair)?;
            }
        }
    }
    for q in 0..n {
        c.add("h", &[], &[q])?;
    }
    Ok(())
}

fn hes(c: &mut Circuit, depth: usize) -> Result<()> {
    let n = c.n_qubits();
    for _ in 0..depth {
        for i in 0..n - 1 {
            c.add("cx", &[], &[i, i + 1])?;
            c.add("rz", &[2.0 * ISING_J * TROTTER_DT], &[i + 1])?;
            c.add("cx", &[], &[i, i + 1])?;
        }
        for q in 0..n {
            c.add("rx", &[2.0 * ISING_H * TROTTER_DT], &[q])?;
        }
    }
    Ok(())
}
