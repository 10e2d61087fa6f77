//! Simulates a QFT on a basis state and checks the uniform output moduli.
//!
//! ```text
//! cargo run --release --example qft -- [n]
//! ```

use qfuse::{gen_benchmark, simulate, BenchmarkKind, FusionConfig, RunOptions, Statevector};

fn main() -> qfuse::Result<()> {
    let n = std::env::args()
        .nth(1)
        .map(|a| a.parse::<usize>().expect("qubit count"))
        .unwrap_or(16);
    let c = gen_benchmark(BenchmarkKind::Qft, n, 0, 0)?;
    let cfg = FusionConfig::size_only(5);
    let (sv, report): (Statevector<f64>, _) =
        simulate(&c, &cfg, None, &RunOptions::default().with_threads(4))?;

    let expect = 1.0 / (1u64 << n) as f64;
    let worst = (0..sv.len())
        .map(|i| (sv.modulus(i).powi(2) - expect).abs())
        .fold(0.0, f64::max);
    println!(
        "qft-{n}: {} gates fused to {}",
        c.len(),
        report.executed_gates
    );
    println!(
        "norm {:.15}, worst probability error {worst:.2e}",
        sv.norm()
    );
    for (key, value) in report.key_values() {
        println!("  {key} = {value}");
    }
    Ok(())
}
