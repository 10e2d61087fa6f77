//! Compares no fusion, size-only fusion and adaptive fusion on the sparse
//! benchmark families.
//!
//! ```text
//! cargo run --release --example ablation -- [n] [depth]
//! ```

use std::time::Instant;

use qfuse::fusion::{bench_cost_model, BenchOptions};
use qfuse::{gen_benchmark, simulate, BenchmarkKind, FusionConfig, RunOptions, Statevector};

fn main() -> qfuse::Result<()> {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<usize>().expect("integer argument"));
    let n = args.next().unwrap_or(20);
    let depth = args.next().unwrap_or(20);

    let started = Instant::now();
    let cm = bench_cost_model(&BenchOptions {
        bench_n: n.min(18),
        repetitions: 3,
        ..BenchOptions::default()
    })?;
    println!("cost model benched in {:.2?}", started.elapsed());

    let opts = RunOptions::default();
    let configs = [
        ("none", FusionConfig::none()),
        ("size-only", FusionConfig::size_only(5)),
        ("cpu", FusionConfig::cpu_preset()),
    ];
    println!(
        "{:<5} {:<10} {:>7} {:>12} {:>10} {:>10}",
        "bench", "fusion", "gates", "ops", "fuse ms", "exec ms"
    );
    for kind in [BenchmarkKind::Qft, BenchmarkKind::Iqp, BenchmarkKind::Hes] {
        let c = gen_benchmark(kind, n, depth, 7)?;
        for (name, cfg) in &configs {
            let (_sv, r): (Statevector<f64>, _) = simulate(&c, cfg, Some(&cm), &opts)?;
            println!(
                "{:<5} {:<10} {:>7} {:>12} {:>10.1} {:>10.1}",
                kind.name(),
                name,
                r.executed_gates,
                r.total_op_count,
                r.fusion_time.as_secs_f64() * 1e3,
                r.execution_time.as_secs_f64() * 1e3
            );
        }
    }
    Ok(())
}
