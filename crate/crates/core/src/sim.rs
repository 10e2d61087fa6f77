//! Statevector storage and parallel circuit execution.

use std::fmt;
use std::io::{Read, Write};
use std::time::{Duration, Instant};

use num_traits::Float;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::fusion::{run_fusion, CostModel, FusionConfig};
use crate::gatecore::Tolerances;
use crate::kernel::{plan_kernel, AmpPtrs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn bytes(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(Error::Config(format!(
                "unknown precision `{s}` (f32 or f64)"
            ))),
        }
    }
}

/// Amplitude scalar type.
pub trait Real: Float + Default + Send + Sync + fmt::Debug + fmt::Display + 'static {
    const PRECISION: Precision;

    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
    fn to_le_bytes_vec(self, out: &mut Vec<u8>);
    fn from_le_slice(b: &[u8]) -> Self;
}

impl Real for f32 {
    const PRECISION: Precision = Precision::F32;

    fn from_f64(x: f64) -> Self {
        x as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    fn to_le_bytes_vec(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le_slice(b: &[u8]) -> Self {
        f32::from_le_bytes(b.try_into().expect("4 bytes"))
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::F64;

    fn from_f64(x: f64) -> Self {
        x
    }

    fn as_f64(self) -> f64 {
        self
    }

    fn to_le_bytes_vec(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le_slice(b: &[u8]) -> Self {
        f64::from_le_bytes(b.try_into().expect("8 bytes"))
    }
}

/// Hard upper bound on statevector size regardless of host memory.
pub const MAX_QUBITS: usize = 48;

/// Bytes needed for an `n`-qubit state: two arrays of `2^n` scalars.
pub fn required_bytes(n: usize, precision: Precision) -> u128 {
    2 * (1u128 << n.min(127)) * precision.bytes() as u128
}

/// Memory the host reports as available, if known.
pub fn host_available_bytes() -> Option<u128> {
    let text = std::fs::read_to_string("/proc/meminfo").ok()?;
    let line = text.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kib: u128 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib * 1024)
}

/// Fails with the byte count when an `n`-qubit state cannot fit.
pub fn check_state_fits(n: usize, precision: Precision) -> Result<()> {
    let bytes = required_bytes(n, precision);
    if n > MAX_QUBITS {
        return Err(Error::Allocation {
            n,
            bytes,
            reason: format!("more than {MAX_QUBITS} qubits"),
        });
    }
    if let Some(avail) = host_available_bytes() {
        if bytes > avail {
            return Err(Error::Allocation {
                n,
                bytes,
                reason: format!("host has {avail} bytes available"),
            });
        }
    }
    Ok(())
}

/// `2^n` complex amplitudes stored as separate real and imaginary arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector<T> {
    n: usize,
    re: Vec<T>,
    im: Vec<T>,
}

fn alloc_zeroed<T: Real>(n: usize, len: usize) -> Result<Vec<T>> {
    let mut v = Vec::new();
    v.try_reserve_exact(len).map_err(|e| Error::Allocation {
        n,
        bytes: required_bytes(n, T::PRECISION),
        reason: e.to_string(),
    })?;
    v.resize(len, T::zero());
    Ok(v)
}

impl<T: Real> Statevector<T> {
    /// The `|0...0>` state.
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    /// The computational basis state `|index>`.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension(
                "statevector needs at least one qubit".into(),
            ));
        }
        check_state_fits(n, T::PRECISION)?;
        let len = 1usize << n;
        if index >= len {
            return Err(Error::Dimension(format!("basis index {index} >= 2^{n}")));
        }
        let mut re = alloc_zeroed::<T>(n, len)?;
        let im = alloc_zeroed::<T>(n, len)?;
        re[index] = T::one();
        Ok(Statevector { n, re, im })
    }

    /// Builds a state from raw amplitude arrays (not renormalized).
    pub fn from_parts(re: Vec<T>, im: Vec<T>) -> Result<Self> {
        if re.len() != im.len() || !re.len().is_power_of_two() || re.len() < 2 {
            return Err(Error::Dimension(format!(
                "amplitude arrays of length {} and {}",
                re.len(),
                im.len()
            )));
        }
        Ok(Statevector {
            n: re.len().trailing_zeros() as usize,
            re,
            im,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn re(&self) -> &[T] {
        &self.re
    }

    pub fn im(&self) -> &[T] {
        &self.im
    }

    pub fn parts_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.re, &mut self.im)
    }

    /// Modulus of amplitude `i`.
    pub fn modulus(&self, i: usize) -> f64 {
        self.re[i].as_f64().hypot(self.im[i].as_f64())
    }

    /// l2 norm with compensated summation.
    pub fn norm(&self) -> f64 {
        let mut sum = 0.0f64;
        let mut carry = 0.0f64;
        for (r, i) in self.re.iter().zip(&self.im) {
            let (r, i) = (r.as_f64(), i.as_f64());
            let y = r * r + i * i - carry;
            let t = sum + y;
            carry = (t - sum) - y;
            sum = t;
        }
        sum.sqrt()
    }

    pub fn bytes(&self) -> u128 {
        required_bytes(self.n, T::PRECISION)
    }
}

/// `norm(sv)` as a free function.
pub fn norm<T: Real>(sv: &Statevector<T>) -> f64 {
    sv.norm()
}

/// `init_zero_state(n)` in the requested scalar type.
pub fn init_zero_state<T: Real>(n: usize) -> Result<Statevector<T>> {
    Statevector::zero(n)
}

/// Largest per-index modulus of `a - b`, in double precision.
pub fn compare_states<A: Real, B: Real>(a: &Statevector<A>, b: &Statevector<B>) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::Dimension(format!(
            "cannot compare {}-qubit and {}-qubit states",
            a.n, b.n
        )));
    }
    Ok(a.re
        .iter()
        .zip(&a.im)
        .zip(b.re.iter().zip(&b.im))
        .map(|((ar, ai), (br, bi))| (ar.as_f64() - br.as_f64()).hypot(ai.as_f64() - bi.as_f64()))
        .fold(0.0, f64::max))
}

/// Execution settings for [`run_circuit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub threads: usize,
    /// SIMD exponent: vectors of `2^s` lanes.
    pub simd_s: usize,
    pub tolerances: Tolerances,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threads: 1,
            simd_s: 0,
            tolerances: Tolerances::default(),
        }
    }
}

impl RunOptions {
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_simd(mut self, s: usize) -> Self {
        self.simd_s = s;
        self
    }
}

/// Timing and size summary of one simulation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub parse_time: Duration,
    pub fusion_time: Duration,
    pub planning_time: Duration,
    pub execution_time: Duration,
    pub n_qubits: usize,
    /// Gates before fusion.
    pub original_gates: usize,
    /// Gates (fused blocks) actually executed.
    pub executed_gates: usize,
    pub total_op_count: u64,
    pub threads: usize,
    pub simd_s: usize,
    pub precision: Option<Precision>,
    pub peak_memory_bytes: u128,
}

/// Keys written by [`RunReport::key_values`], in order.
pub const REPORT_KEYS: &[&str] = &[
    "n_qubits",
    "precision",
    "threads",
    "simd_exponent",
    "original_gates",
    "executed_gates",
    "compression_ratio",
    "total_op_count",
    "parse_seconds",
    "fusion_seconds",
    "planning_seconds",
    "execution_seconds",
    "front_end_seconds",
    "front_end_fraction",
    "peak_memory_bytes",
];

impl RunReport {
    /// Parse, fusion, and planning time together.
    pub fn front_end_time(&self) -> Duration {
        self.parse_time + self.fusion_time + self.planning_time
    }

    pub fn front_end_fraction(&self) -> f64 {
        let fe = self.front_end_time().as_secs_f64();
        let total = fe + self.execution_time.as_secs_f64();
        if total > 0.0 {
            fe / total
        } else {
            0.0
        }
    }

    pub fn compression_ratio(&self) -> f64 {
        if self.executed_gates == 0 {
            1.0
        } else {
            self.original_gates as f64 / self.executed_gates as f64
        }
    }

    /// Machine-readable `key=value` pairs; keys are [`REPORT_KEYS`].
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let vals = [
            self.n_qubits.to_string(),
            self.precision
                .map_or("unknown", Precision::name)
                .to_string(),
            self.threads.to_string(),
            self.simd_s.to_string(),
            self.original_gates.to_string(),
            self.executed_gates.to_string(),
            format!("{:.6}", self.compression_ratio()),
            self.total_op_count.to_string(),
            format!("{:.9}", self.parse_time.as_secs_f64()),
            format!("{:.9}", self.fusion_time.as_secs_f64()),
            format!("{:.9}", self.planning_time.as_secs_f64()),
            format!("{:.9}", self.execution_time.as_secs_f64()),
            format!("{:.9}", self.front_end_time().as_secs_f64()),
            format!("{:.6}", self.front_end_fraction()),
            self.peak_memory_bytes.to_string(),
        ];
        REPORT_KEYS.iter().copied().zip(vals).collect()
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        writeln!(
            f,
            "qubits {:>4}   precision {}   threads {}   simd 2^{}",
            self.n_qubits,
            self.precision.map_or("?", Precision::name),
            self.threads,
            self.simd_s
        )?;
        writeln!(
            f,
            "gates  {:>6} -> {:<6} (ratio {:.2}x)   op count {}",
            self.original_gates,
            self.executed_gates,
            self.compression_ratio(),
            self.total_op_count
        )?;
        writeln!(f, "phase          time (ms)")?;
        writeln!(f, "  parse     {:>12.3}", ms(self.parse_time))?;
        writeln!(f, "  fusion    {:>12.3}", ms(self.fusion_time))?;
        writeln!(f, "  planning  {:>12.3}", ms(self.planning_time))?;
        writeln!(f, "  execution {:>12.3}", ms(self.execution_time))?;
        write!(
            f,
            "front-end share {:.2}%   peak memory {} bytes",
            100.0 * self.front_end_fraction(),
            self.peak_memory_bytes
        )
    }
}

/// Contiguous equal split of `[0, total)` into `parts` ranges; the last range
/// takes the remainder.
pub fn partition(total: u64, parts: usize) -> Vec<(u64, u64)> {
    let parts = parts.max(1) as u64;
    let chunk = total / parts;
    (0..parts)
        .map(|i| {
            let begin = i * chunk;
            let end = if i + 1 == parts { total } else { begin + chunk };
            (begin, end)
        })
        .collect()
}

/// Applies every gate of `c` to `sv` in order with a barrier between gates.
pub fn run_circuit<T: Real>(
    c: &Circuit,
    sv: &mut Statevector<T>,
    opts: &RunOptions,
) -> Result<RunReport> {
    if c.n_qubits() != sv.n() {
        return Err(Error::Dimension(format!(
            "circuit has {} qubits, state has {}",
            c.n_qubits(),
            sv.n()
        )));
    }
    if opts.threads == 0 {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    let pool = if opts.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?,
        )
    } else {
        None
    };
    let n = sv.n();
    let mut report = RunReport {
        n_qubits: n,
        original_gates: c.len(),
        executed_gates: c.len(),
        threads: opts.threads,
        simd_s: opts.simd_s,
        precision: Some(T::PRECISION),
        peak_memory_bytes: sv.bytes(),
        ..RunReport::default()
    };
    let ptrs = AmpPtrs::of(sv);
    for g in c.gates() {
        let started = Instant::now();
        // the lane region cannot exceed the qubits left over by the gate
        let s = opts.simd_s.min(n - g.k());
        let plan = plan_kernel(g, n, s, opts.tolerances, false)?;
        let bound = plan.bind::<T>(None)?;
        report.total_op_count += g.profile(opts.tolerances).op_count;
        let planned = Instant::now();
        report.planning_time += planned - started;

        let ranges = partition(plan.t_count(), opts.threads);
        match &pool {
            None => {
                // SAFETY: `sv` is exclusively borrowed for this call.
                unsafe { bound.apply_raw(ptrs, 0, plan.t_count()) }
            }
            Some(pool) => pool.scope(|scope| {
                for &(begin, end) in &ranges {
                    if begin == end {
                        continue;
                    }
                    let bound = &bound;
                    // SAFETY: ranges are disjoint, so workers touch disjoint
                    // amplitude groups; the scope joins before the next gate.
                    scope.spawn(move |_| unsafe { bound.apply_raw(ptrs, begin, end) });
                }
            }),
        }
        report.execution_time += planned.elapsed();
    }
    Ok(report)
}

/// Fuses `c` per `cfg` and simulates it from `|0...0>`.
pub fn simulate<T: Real>(
    c: &Circuit,
    cfg: &FusionConfig,
    cost_model: Option<&CostModel>,
    opts: &RunOptions,
) -> Result<(Statevector<T>, RunReport)> {
    let (fused, stats) = run_fusion(c, cfg, cost_model)?;
    let mut sv = Statevector::<T>::zero(c.n_qubits())?;
    let mut report = run_circuit(&fused, &mut sv, opts)?;
    report.fusion_time = stats.fusion_time;
    report.original_gates = c.len();
    Ok((sv, report))
}

/// Applies every gate with the unspecialized reference loop.
pub fn reference_run<T: Real>(c: &Circuit, sv: &mut Statevector<T>) -> Result<()> {
    for g in c.gates() {
        crate::kernel::reference_apply(g, sv)?;
    }
    Ok(())
}

const DUMP_MAGIC: &[u8; 4] = b"QSV1";

/// Writes `"QSV1"`, a precision byte (4 or 8), the qubit count byte, ten
/// reserved zero bytes, then all real parts and all imaginary parts as
/// little-endian floats.
pub fn write_state<T: Real, W: Write>(sv: &Statevector<T>, mut w: W) -> Result<()> {
    let mut header = [0u8; 16];
    header[..4].copy_from_slice(DUMP_MAGIC);
    header[4] = T::PRECISION.bytes() as u8;
    header[5] = sv.n as u8;
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(sv.len() * T::PRECISION.bytes());
    for part in [&sv.re, &sv.im] {
        buf.clear();
        for x in part.iter() {
            x.to_le_bytes_vec(&mut buf);
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// A state dump read back in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDump {
    pub precision: Precision,
    pub state: Statevector<f64>,
}

pub fn read_state<R: Read>(mut r: R) -> Result<StateDump> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != DUMP_MAGIC {
        return Err(Error::Dimension("not a QSV1 state dump".into()));
    }
    let precision = match header[4] {
        4 => Precision::F32,
        8 => Precision::F64,
        b => return Err(Error::Dimension(format!("unknown precision byte {b}"))),
    };
    let n = header[5] as usize;
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Dimension(format!("invalid qubit count {n}")));
    }
    let len = 1usize << n;
    let width = precision.bytes();
    let mut bytes = vec![0u8; 2 * len * width];
    r.read_exact(&mut bytes)?;
    let decode = |chunk: &[u8]| match precision {
        Precision::F32 => f32::from_le_slice(chunk) as f64,
        Precision::F64 => f64::from_le_slice(chunk),
    };
    let values: Vec<f64> = bytes.chunks_exact(width).map(decode).collect();
    let (re, im) = values.split_at(len);
    Ok(StateDump {
        precision,
        state: Statevector::from_parts(re.to_vec(), im.to_vec())?,
    })
}
