#![allow(dead_code)]

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qfuse::circuit::{matrix_gate, named_gate, Circuit};
use qfuse::gatecore::random_unitary;

const ONE_QUBIT: &[&str] = &["x", "y", "z", "h", "s", "sdg", "t", "tdg"];
const ROTATIONS: &[&str] = &["rx", "ry", "rz"];
const TWO_QUBIT: &[&str] = &["cx", "cz", "swap"];

/// Mix of named gates (with unsorted operands) and random unitaries on up to
/// three qubits.
pub fn random_circuit(n: usize, len: usize, seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Circuit::new(n).unwrap();
    for _ in 0..len {
        let pick = |rng: &mut ChaCha8Rng, k: usize| sample(rng, n, k).into_vec();
        let g = match rng.random_range(0..10) {
            0..=2 => named_gate(
                ONE_QUBIT[rng.random_range(0..ONE_QUBIT.len())],
                &[],
                &pick(&mut rng, 1),
            ),
            3 => named_gate(
                ROTATIONS[rng.random_range(0..ROTATIONS.len())],
                &[rng.random_range(-3.0..3.0)],
                &pick(&mut rng, 1),
            ),
            4 => named_gate(
                "u3",
                &[rng.random(), rng.random(), rng.random()],
                &pick(&mut rng, 1),
            ),
            5 | 6 if n >= 2 => named_gate(
                TWO_QUBIT[rng.random_range(0..TWO_QUBIT.len())],
                &[],
                &pick(&mut rng, 2),
            ),
            7 if n >= 2 => named_gate("cp", &[rng.random_range(-3.0..3.0)], &pick(&mut rng, 2)),
            8 if n >= 3 => named_gate("ccx", &[], &pick(&mut rng, 3)),
            _ => {
                let k = rng.random_range(1..=n.min(3));
                let mut targets = pick(&mut rng, k);
                targets.sort_unstable();
                let u = random_unitary(k, &mut rng);
                matrix_gate(&targets, u)
            }
        };
        c.push(g.unwrap()).unwrap();
    }
    c
}
