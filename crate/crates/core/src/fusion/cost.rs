//! Measured per-gate execution costs and their text format.

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::Path;
use std::time::Duration;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{matrix_gate, Circuit};
use crate::error::{Error, Result};
use crate::gatecore::{fuse_sequence, random_unitary, ComplexScalar, Gate, GateMatrix, Tolerances};
use crate::sim::{run_circuit, Precision, Real, RunOptions, Statevector};
use crate::tile::GateBlock;

pub const COST_MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRecord {
    pub k: usize,
    pub op_count: u64,
    pub threads: usize,
    /// Measured time for one amplitude group, i.e. total gate time / 2^(n-k).
    pub seconds_per_group: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub records: Vec<CostRecord>,
    pub bench_n: usize,
    pub precision: Precision,
    pub host: String,
}

impl CostModel {
    pub fn new(
        records: Vec<CostRecord>,
        bench_n: usize,
        precision: Precision,
        host: impl Into<String>,
    ) -> Result<Self> {
        let cm = CostModel {
            records,
            bench_n,
            precision,
            host: host.into(),
        };
        cm.validate()?;
        Ok(cm)
    }

    /// A table where every gate costs the same per group, so larger gates are
    /// always cheaper overall. Useful as a neutral model in tests.
    pub fn flat(max_k: usize) -> Self {
        let records = (1..=max_k)
            .flat_map(|k| {
                let dense = 1u64 << (2 * k + 2);
                [dense / 4, dense / 2, dense].map(|op_count| CostRecord {
                    k,
                    op_count: op_count.max(1),
                    threads: 1,
                    seconds_per_group: 1e-9,
                })
            })
            .collect();
        CostModel {
            records,
            bench_n: 0,
            precision: Precision::F64,
            host: "flat".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            if !(r.seconds_per_group.is_finite() && r.seconds_per_group > 0.0) {
                return Err(Error::Config(format!(
                    "record k={} ops={} has non-positive time {}",
                    r.k, r.op_count, r.seconds_per_group
                )));
            }
            if r.k == 0 || r.threads == 0 || r.op_count == 0 {
                return Err(Error::Config(format!(
                    "record k={} ops={} threads={} is degenerate",
                    r.k, r.op_count, r.threads
                )));
            }
        }
        Ok(())
    }

    pub fn max_k(&self) -> usize {
        self.records.iter().map(|r| r.k).max().unwrap_or(0)
    }

    pub fn thread_counts(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.records.iter().map(|r| r.threads).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    /// Per-group time for a `k`-qubit gate of `op_count` operations, linear in
    /// log2(op_count) between measured points and clamped at the ends. Thread
    /// counts without records use the nearest benchmarked count.
    pub fn seconds_per_group(&self, k: usize, op_count: u64, threads: usize) -> Result<f64> {
        let threads_for_k = {
            let mut t: Vec<usize> = self
                .records
                .iter()
                .filter(|r| r.k == k)
                .map(|r| r.threads)
                .collect();
            t.sort_unstable();
            t.dedup();
            t
        };
        let nearest = threads_for_k
            .iter()
            .copied()
            .min_by_key(|&t| t.abs_diff(threads))
            .ok_or(Error::CostLookup { k, threads })?;
        let mut points: Vec<(f64, f64)> = Vec::new();
        let mut rows: Vec<&CostRecord> = self
            .records
            .iter()
            .filter(|r| r.k == k && r.threads == nearest)
            .collect();
        rows.sort_by_key(|r| r.op_count);
        for group in rows.chunk_by(|a, b| a.op_count == b.op_count) {
            let mean = group.iter().map(|r| r.seconds_per_group).sum::<f64>() / group.len() as f64;
            points.push(((group[0].op_count as f64).log2(), mean));
        }
        let x = (op_count.max(1) as f64).log2();
        let (first, last) = (points[0], points[points.len() - 1]);
        if x <= first.0 {
            return Ok(first.1);
        }
        if x >= last.0 {
            return Ok(last.1);
        }
        let i = points.partition_point(|p| p.0 <= x);
        let ((x0, y0), (x1, y1)) = (points[i - 1], points[i]);
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    /// Estimated seconds to apply the gate once to an `n`-qubit state.
    pub fn estimate(&self, k: usize, op_count: u64, threads: usize, n: usize) -> Result<f64> {
        let spg = self.seconds_per_group(k, op_count, threads)?;
        Ok(spg * (n.saturating_sub(k) as f64).exp2())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let host = self.host.replace(['\n', '\r'], " ");
        let _ = writeln!(s, "version {COST_MODEL_VERSION}");
        let _ = writeln!(s, "precision {}", self.precision);
        let _ = writeln!(s, "bench_n {}", self.bench_n);
        let _ = writeln!(s, "host {host}");
        for r in &self.records {
            let _ = writeln!(
                s,
                "k={} ops={} threads={} spg={:e}",
                r.k, r.op_count, r.threads, r.seconds_per_group
            );
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::CostModelFormat {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let mut version = None;
        let mut precision = None;
        let mut bench_n = None;
        let mut host = None;
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with("k=") {
                records.push(parse_record(line).map_err(|m| err(lineno, m))?);
                continue;
            }
            let (key, value) = line.split_once(' ').unwrap_or((line, ""));
            let value = value.trim();
            match key {
                "version" => {
                    let v: u32 = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad version '{value}'")))?;
                    if v != COST_MODEL_VERSION {
                        return Err(err(
                            lineno,
                            format!("unsupported version {v}, expected {COST_MODEL_VERSION}"),
                        ));
                    }
                    version = Some(v);
                }
                "precision" => {
                    precision = Some(
                        value
                            .parse::<Precision>()
                            .map_err(|e| err(lineno, e.to_string()))?,
                    )
                }
                "bench_n" => {
                    bench_n = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| err(lineno, format!("bad bench_n '{value}'")))?,
                    )
                }
                "host" => host = Some(value.to_string()),
                other => return Err(err(lineno, format!("unknown key '{other}'"))),
            }
        }
        if version.is_none() {
            return Err(err(1, "missing version header".into()));
        }
        let cm = CostModel {
            records,
            bench_n: bench_n.ok_or_else(|| err(1, "missing bench_n header".into()))?,
            precision: precision.ok_or_else(|| err(1, "missing precision header".into()))?,
            host: host.unwrap_or_default(),
        };
        Ok(cm)
    }
}

fn parse_record(line: &str) -> std::result::Result<CostRecord, String> {
    let mut k = None;
    let mut ops = None;
    let mut threads = None;
    let mut spg = None;
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got '{field}'"))?;
        let bad = || format!("bad value '{value}' for {key}");
        match key {
            "k" => k = Some(value.parse::<usize>().map_err(|_| bad())?),
            "ops" => ops = Some(value.parse::<u64>().map_err(|_| bad())?),
            "threads" => threads = Some(value.parse::<usize>().map_err(|_| bad())?),
            "spg" => spg = Some(value.parse::<f64>().map_err(|_| bad())?),
            other => return Err(format!("unknown field '{other}'")),
        }
    }
    let r = CostRecord {
        k: k.ok_or("missing k")?,
        op_count: ops.ok_or("missing ops")?,
        threads: threads.ok_or("missing threads")?,
        seconds_per_group: spg.ok_or("missing spg")?,
    };
    if !(r.seconds_per_group.is_finite() && r.seconds_per_group > 0.0) {
        return Err(format!("spg must be positive, got {}", r.seconds_per_group));
    }
    if r.k == 0 || r.threads == 0 || r.op_count == 0 {
        return Err("k, ops and threads must be positive".into());
    }
    Ok(r)
}

pub fn save_cost_model(cm: &CostModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, cm.to_text())?;
    Ok(())
}

pub fn load_cost_model(path: impl AsRef<Path>) -> Result<CostModel> {
    let path = path.as_ref();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::CostModelNotFound(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    CostModel::from_text(&text, path)
}

/// Estimated seconds to apply `b` once to an `n`-qubit state.
pub fn estimate_cost(
    b: &GateBlock,
    cm: &CostModel,
    threads: usize,
    n: usize,
    tol: Tolerances,
) -> Result<f64> {
    let ops = b.profile(tol)?.op_count;
    cm.estimate(b.size(), ops, threads, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub bench_n: usize,
    pub k_range: RangeInclusive<usize>,
    pub thread_counts: Vec<usize>,
    pub repetitions: usize,
    pub precision: Precision,
    pub simd_s: usize,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            bench_n: 22,
            k_range: 1..=7,
            thread_counts: vec![1],
            repetitions: 5,
            precision: Precision::F64,
            simd_s: RunOptions::default().simd_s,
            seed: 0,
        }
    }
}

fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> ComplexScalar {
    ComplexScalar::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

fn random_diagonal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> GateMatrix {
    let dim = 1usize << k;
    let mut entries = vec![ComplexScalar::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        entries[i * dim + i] = random_phase(rng);
    }
    GateMatrix::new(k, entries).expect("diagonal of phases is valid")
}

/// Gates on local qubits `0..k` with full, half and quarter density: a dense
/// unitary on `k - j` qubits tensored with a diagonal on `j` qubits. For
/// `k = 1` the sparser levels are a phase diagonal and a Pauli X.
fn bench_matrices<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<GateMatrix> {
    if k == 1 {
        let x = crate::circuit::named_gate("x", &[], &[0]).expect("x is a named gate");
        return vec![
            random_unitary(1, rng),
            random_diagonal(1, rng),
            x.matrix().clone(),
        ];
    }
    (0..3)
        .map(|j| {
            let dense = k - j;
            let mut parts: Vec<Gate> = Vec::new();
            if dense > 0 {
                let targets: Vec<usize> = (0..dense).collect();
                parts.push(Gate::new(random_unitary(dense, rng), targets).expect("valid"));
            }
            if j > 0 {
                let targets: Vec<usize> = (dense..k).collect();
                parts.push(Gate::new(random_diagonal(j, rng), targets).expect("valid"));
            }
            fuse_sequence(&parts)
                .expect("disjoint parts fuse")
                .matrix()
                .clone()
        })
        .collect()
}

/// Target placements averaged into each record.
const PLACEMENTS: usize = 4;

/// Times the real kernel on a scratch state for every gate size, density
/// level and thread count, keeping the median over the repetitions.
pub fn bench_cost_model(opts: &BenchOptions) -> Result<CostModel> {
    match opts.precision {
        Precision::F32 => bench_with::<f32>(opts),
        Precision::F64 => bench_with::<f64>(opts),
    }
}

fn bench_with<T: Real>(opts: &BenchOptions) -> Result<CostModel> {
    let n = opts.bench_n;
    if *opts.k_range.start() == 0 || *opts.k_range.end() > n || opts.k_range.is_empty() {
        return Err(Error::Config(format!(
            "bench gate sizes {:?} must lie in 1..={n}",
            opts.k_range
        )));
    }
    if opts.repetitions == 0 || opts.thread_counts.is_empty() || opts.thread_counts.contains(&0) {
        return Err(Error::Config(
            "benchmark needs at least one repetition and positive thread counts".into(),
        ));
    }
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut sv = Statevector::<T>::zero(n)?;
    let mut records = Vec::new();
    let mut min_sample = Duration::MAX;
    for k in opts.k_range.clone() {
        // every density level is timed on the same target placements
        let placements: Vec<Vec<usize>> = (0..PLACEMENTS)
            .map(|_| {
                let mut t = sample(&mut rng, n, k).into_vec();
                t.sort_unstable();
                t
            })
            .collect();
        for m in bench_matrices(k, &mut rng) {
            let gates = placements
                .iter()
                .map(|targets| matrix_gate(targets, m.clone()))
                .collect::<Result<Vec<_>>>()?;
            let op_count = gates[0].profile(tol).op_count;
            let circuit = Circuit::from_gates(n, gates)?;
            for &threads in &opts.thread_counts {
                let run = RunOptions {
                    threads,
                    simd_s: opts.simd_s,
                    tolerances: tol,
                };
                let mut samples: Vec<Duration> = (0..opts.repetitions)
                    .map(|_| run_circuit(&circuit, &mut sv, &run).map(|r| r.execution_time))
                    .collect::<Result<_>>()?;
                samples.sort_unstable();
                let median = samples[samples.len() / 2];
                min_sample = min_sample.min(samples[0] / PLACEMENTS as u32);
                let groups = ((n - k) as f64).exp2() * PLACEMENTS as f64;
                records.push(CostRecord {
                    k,
                    op_count,
                    threads,
                    seconds_per_group: (median.as_secs_f64() / groups).max(f64::MIN_POSITIVE),
                });
            }
        }
    }
    let mut host = format!(
        "{} {} cpus={}",
        std::env::consts::ARCH,
        std::env::consts::OS,
        std::thread::available_parallelism().map_or(1, |p| p.get())
    );
    if min_sample < Duration::from_micros(10) {
        host.push_str(" warning=samples-near-timer-resolution");
    }
    CostModel::new(records, n, T::PRECISION, host)
}
