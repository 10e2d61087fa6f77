//! Command-line front end: `run`, `fuse`, `gen` and `costmodel`.
//!
//! Exit codes: 0 success, 1 circuit parse error, 2 configuration error
//! (including bad flags and states too large for the host), 3 runtime error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::circuit::{gen_benchmark, parse_circuit, serialize_circuit, BenchmarkKind, Circuit};
use crate::error::{Error, Result};
use crate::fusion::{
    bench_cost_model, load_cost_model, run_fusion, save_cost_model, BenchOptions, CostModel,
    FusionConfig, FusionMode, FusionStats,
};
use crate::gatecore::Tolerances;
use crate::sim::{check_state_fits, simulate, write_state, Precision, Real, RunOptions, RunReport};

pub const EXIT_PARSE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "qfuse",
    version,
    about = "Statevector simulator with sparsity-aware gate fusion"
)]
pub struct Cli {
    /// Log verbosity (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, fuse and simulate a circuit from |0...0>
    Run(RunArgs),
    /// Fuse a circuit and write the result in circuit format
    Fuse(FuseArgs),
    /// Generate a benchmark circuit
    Gen(GenArgs),
    /// Benchmark the kernel on this host and write a cost model
    Costmodel(CostModelArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FusionChoice {
    None,
    SizeOnly,
    Adaptive,
    /// Adaptive, k-max 7, at most 4096 operations per gate
    Cpu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionChoice {
    F32,
    F64,
}

impl From<PrecisionChoice> for Precision {
    fn from(p: PrecisionChoice) -> Self {
        match p {
            PrecisionChoice::F32 => Precision::F32,
            PrecisionChoice::F64 => Precision::F64,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FusionArgs {
    /// Fusion mode or preset
    #[arg(long, value_enum, default_value = "size-only")]
    pub fusion: FusionChoice,

    /// Largest fused gate in qubits [default: 5, or 7 for cpu]
    #[arg(long)]
    pub k_max: Option<usize>,

    /// Adaptive mode: largest operation count per fused gate [default: none, or 4096 for cpu]
    #[arg(long)]
    pub max_op_count: Option<u64>,

    /// Magnitude at or below which a matrix scalar counts as zero
    #[arg(long, default_value_t = 1e-8)]
    pub zero_tolerance: f64,

    /// Distance from +-1 within which a scalar counts as unit; 0 disables
    #[arg(long, default_value_t = 1e-8)]
    pub one_tolerance: f64,

    /// Grow the fusion size limit from 2 up to k-max
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub agglomerative: bool,

    /// Repeat traversals at each size until nothing fuses
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub multi_traversal: bool,

    /// Cost model file, required by adaptive modes
    #[arg(long)]
    pub cost_model: Option<PathBuf>,

    /// Worker threads [default: host logical cores]
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Circuit file
    pub circuit: PathBuf,

    #[command(flatten)]
    pub fusion: FusionArgs,

    /// Amplitude precision
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: PrecisionChoice,

    /// SIMD exponent s: amplitude groups of 2^s lanes
    #[arg(short = 'S', long = "simd", default_value_t = 0)]
    pub simd: usize,

    /// Write key=value report lines to this file
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Write the final state as a binary dump
    #[arg(long)]
    pub dump_state: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FuseArgs {
    /// Circuit file
    pub circuit: PathBuf,

    #[command(flatten)]
    pub fusion: FusionArgs,

    /// Output circuit file [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Benchmark family: qft, ala, rqc, qvc, iqp or hes
    pub kind: String,

    /// Number of qubits
    #[arg(short = 'n', long = "qubits")]
    pub qubits: usize,

    /// Layers or time steps (ignored for qft)
    #[arg(long, default_value_t = 10)]
    pub depth: usize,

    /// Random seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output circuit file [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CostModelArgs {
    /// Qubits in the scratch state used for timing
    #[arg(long, default_value_t = 22)]
    pub bench_n: usize,

    /// Smallest gate size to benchmark
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,

    /// Largest gate size to benchmark
    #[arg(long, default_value_t = 7)]
    pub k_max: usize,

    /// Comma-separated thread counts to benchmark
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub threads: Vec<usize>,

    /// Timed runs per record; the median is kept
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,

    /// Amplitude precision
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: PrecisionChoice,

    /// SIMD exponent s used while timing
    #[arg(short = 'S', long = "simd", default_value_t = 0)]
    pub simd: usize,

    /// Random seed for the benchmark gates
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output cost model file
    #[arg(short, long, default_value = "host.cm")]
    pub output: PathBuf,
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |p| p.get())
}

impl FusionArgs {
    pub fn tolerances(&self) -> Result<Tolerances> {
        Tolerances::new(self.zero_tolerance, self.one_tolerance)
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or_else(default_threads)
    }

    pub fn config(&self) -> Result<FusionConfig> {
        let mut cfg = match self.fusion {
            FusionChoice::None => FusionConfig::none(),
            FusionChoice::SizeOnly => FusionConfig::size_only(5),
            FusionChoice::Adaptive => FusionConfig::adaptive(5, None),
            FusionChoice::Cpu => FusionConfig::cpu_preset(),
        };
        if let Some(k) = self.k_max {
            cfg.k_max = k;
        }
        if self.max_op_count.is_some() {
            cfg.max_op_count = self.max_op_count;
        }
        cfg.agglomerative = self.agglomerative;
        cfg.multi_traversal = self.multi_traversal;
        cfg.tolerances = self.tolerances()?;
        cfg.threads = self.threads();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_cost_model(&self, cfg: &FusionConfig) -> Result<Option<CostModel>> {
        match (&self.cost_model, cfg.mode) {
            (Some(path), FusionMode::Adaptive) => load_cost_model(path).map(Some),
            (None, FusionMode::Adaptive) => Err(Error::Config(
                "adaptive fusion needs --cost-model (create one with `qfuse costmodel`)".into(),
            )),
            _ => Ok(None),
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } => EXIT_PARSE,
        Error::Config(_)
        | Error::CostModelFormat { .. }
        | Error::CostModelNotFound(_)
        | Error::Allocation { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn read_circuit(path: &Path) -> Result<Circuit> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_circuit(&text)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> Result<RunReport> {
    let cfg = args.fusion.config()?;
    let cm = args.fusion.load_cost_model(&cfg)?;
    let precision = Precision::from(args.precision);
    let opts = RunOptions {
        threads: cfg.threads,
        simd_s: args.simd,
        tolerances: cfg.tolerances,
    };
    let started = Instant::now();
    let c = read_circuit(&args.circuit)?;
    let parse_time = started.elapsed();
    check_state_fits(c.n_qubits(), precision)?;
    let mut report = match precision {
        Precision::F32 => {
            run_with::<f32>(&c, &cfg, cm.as_ref(), &opts, args.dump_state.as_deref())?
        }
        Precision::F64 => {
            run_with::<f64>(&c, &cfg, cm.as_ref(), &opts, args.dump_state.as_deref())?
        }
    };
    report.parse_time = parse_time;
    println!("{report}");
    if let Some(path) = &args.report {
        let mut w = create(path)?;
        for (k, v) in report.key_values() {
            writeln!(w, "{k}={v}")?;
        }
        w.flush()?;
    }
    Ok(report)
}

fn run_with<T: Real>(
    c: &Circuit,
    cfg: &FusionConfig,
    cm: Option<&CostModel>,
    opts: &RunOptions,
    dump: Option<&Path>,
) -> Result<RunReport> {
    let (sv, report) = simulate::<T>(c, cfg, cm, opts)?;
    if let Some(path) = dump {
        let mut w = create(path)?;
        write_state(&sv, &mut w)?;
        w.flush()?;
    }
    Ok(report)
}

/// `original=N fused=M ratio=R ops=X seconds=S`
pub fn stats_line(stats: &FusionStats) -> String {
    format!(
        "original={} fused={} ratio={:.4} ops={} seconds={:.6}",
        stats.original_gate_count,
        stats.fused_block_count,
        stats.compression_ratio,
        stats.total_op_count,
        stats.fusion_time.as_secs_f64()
    )
}

pub fn cmd_fuse(args: &FuseArgs) -> Result<FusionStats> {
    let cfg = args.fusion.config()?;
    let cm = args.fusion.load_cost_model(&cfg)?;
    let c = read_circuit(&args.circuit)?;
    let (fused, stats) = run_fusion(&c, &cfg, cm.as_ref())?;
    write_output(args.output.as_deref(), &serialize_circuit(&fused))?;
    if args.output.is_some() {
        println!("{}", stats_line(&stats));
    } else {
        eprintln!("{}", stats_line(&stats));
    }
    Ok(stats)
}

pub fn cmd_gen(args: &GenArgs) -> Result<Circuit> {
    let kind: BenchmarkKind = args.kind.parse()?;
    let c = gen_benchmark(kind, args.qubits, args.depth, args.seed)?;
    write_output(args.output.as_deref(), &serialize_circuit(&c))?;
    Ok(c)
}

pub fn cmd_costmodel(args: &CostModelArgs) -> Result<CostModel> {
    let precision = Precision::from(args.precision);
    check_state_fits(args.bench_n, precision)?;
    if args.k_min == 0 || args.k_min > args.k_max || args.k_max > args.bench_n {
        return Err(Error::Config(format!(
            "gate sizes {}..={} must be non-empty and within 1..={}",
            args.k_min, args.k_max, args.bench_n
        )));
    }
    let opts = BenchOptions {
        bench_n: args.bench_n,
        k_range: args.k_min..=args.k_max,
        thread_counts: args.threads.clone(),
        repetitions: args.repetitions,
        precision,
        simd_s: args.simd,
        seed: args.seed,
    };
    let cm = bench_cost_model(&opts)?;
    save_cost_model(&cm, &args.output)?;
    println!(
        "{:>3} {:>8} {:>8} {:>14}",
        "k", "ops", "threads", "ns/group"
    );
    for r in &cm.records {
        println!(
            "{:>3} {:>8} {:>8} {:>14.3}",
            r.k,
            r.op_count,
            r.threads,
            r.seconds_per_group * 1e9
        );
    }
    println!(
        "wrote {} records to {}",
        cm.records.len(),
        args.output.display()
    );
    Ok(cm)
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a).map(drop),
        Command::Fuse(a) => cmd_fuse(a).map(drop),
        Command::Gen(a) => cmd_gen(a).map(drop),
        Command::Costmodel(a) => cmd_costmodel(a).map(drop),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::from_default_env()
        .filter_level(level)
        .try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("qfuse").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn presets_map_to_configs() {
        let Command::Run(a) = parse(&["run", "c.qc", "--fusion", "cpu"]).command else {
            panic!()
        };
        let cfg = a.fusion.config().unwrap();
        assert_eq!(
            (cfg.mode, cfg.k_max, cfg.max_op_count),
            (FusionMode::Adaptive, 7, Some(4096))
        );
        assert!(a.fusion.load_cost_model(&cfg).is_err());

        let Command::Run(a) = parse(&[
            "run",
            "c.qc",
            "--k-max",
            "3",
            "--agglomerative",
            "false",
            "--threads",
            "2",
        ])
        .command
        else {
            panic!()
        };
        let cfg = a.fusion.config().unwrap();
        assert_eq!(
            (cfg.mode, cfg.k_max, cfg.agglomerative, cfg.threads),
            (FusionMode::SizeOnly, 3, false, 2)
        );
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let Command::Run(a) = parse(&["run", "c.qc", "--k-max", "13"]).command else {
            panic!()
        };
        assert_eq!(exit_code(&a.fusion.config().unwrap_err()), EXIT_CONFIG);
        let Command::Run(a) = parse(&["run", "c.qc", "--zero-tolerance=-1"]).command else {
            panic!()
        };
        assert_eq!(exit_code(&a.fusion.config().unwrap_err()), EXIT_CONFIG);
        assert_eq!(
            main_with_args(["qfuse", "gen", "foo", "-n", "4"]),
            EXIT_CONFIG
        );
        assert_eq!(main_with_args(["qfuse", "run"]), EXIT_CONFIG);
    }

    #[test]
    fn threads_list_parses() {
        let Command::Costmodel(a) = parse(&["costmodel", "--threads", "1,2,4"]).command else {
            panic!()
        };
        assert_eq!(a.threads, vec![1, 2, 4]);
        assert_eq!(a.bench_n, 22);
    }
}
