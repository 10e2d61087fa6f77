//! Generates every benchmark family and prints size statistics, then writes
//! one circuit in the text format and parses it back.
//!
//! ```text
//! cargo run --example generate -- [n] [depth] [seed]
//! ```

use qfuse::{gen_benchmark, parse_circuit, serialize_circuit, BenchmarkKind, Tolerances};

fn main() -> qfuse::Result<()> {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<u64>().expect("integer argument"));
    let n = args.next().unwrap_or(12) as usize;
    let depth = args.next().unwrap_or(10) as usize;
    let seed = args.next().unwrap_or(1);

    let tol = Tolerances::default();
    println!("{:<5} {:>6} {:>10} {:>6}", "kind", "gates", "ops", "max k");
    for kind in BenchmarkKind::ALL {
        let c = gen_benchmark(kind, n, depth, seed)?;
        println!(
            "{:<5} {:>6} {:>10} {:>6}",
            kind.name(),
            c.len(),
            c.total_op_count(tol),
            c.max_gate_size()
        );
    }

    let c = gen_benchmark(BenchmarkKind::Iqp, 4, 2, seed)?;
    let text = serialize_circuit(&c);
    println!("\n{text}");
    let back = parse_circuit(&text)?;
    assert_eq!(back.len(), c.len());
    Ok(())
}
