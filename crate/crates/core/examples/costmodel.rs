//! Benchmarks a small cost model, writes it to disk, reloads it and prints a
//! few estimates.
//!
//! ```text
//! cargo run --release --example costmodel -- [bench_n] [path]
//! ```

use qfuse::fusion::{bench_cost_model, load_cost_model, save_cost_model, BenchOptions};

fn main() -> qfuse::Result<()> {
    let mut args = std::env::args().skip(1);
    let bench_n = args
        .next()
        .map(|a| a.parse::<usize>().expect("qubit count"))
        .unwrap_or(16);
    let path = args.next().unwrap_or_else(|| {
        std::env::temp_dir()
            .join("example.cm")
            .display()
            .to_string()
    });

    let cm = bench_cost_model(&BenchOptions {
        bench_n,
        k_range: 1..=6,
        repetitions: 3,
        ..BenchOptions::default()
    })?;
    save_cost_model(&cm, &path)?;
    let cm = load_cost_model(&path)?;
    println!("{} records written to {path}", cm.records.len());

    println!("{:>2} {:>8} {:>14}", "k", "ops", "s/group");
    for r in &cm.records {
        println!(
            "{:>2} {:>8} {:>14.3e}",
            r.k, r.op_count, r.seconds_per_group
        );
    }
    // An estimate between records is interpolated in log2 of the op count.
    let est = cm.estimate(4, 300, 1, 24)?;
    println!("estimated 4-qubit gate with 300 ops on 24 qubits: {est:.3e} s");
    Ok(())
}
