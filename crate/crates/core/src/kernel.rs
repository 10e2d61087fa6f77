//! Sparsity-specialized gate application.
//!
//! A [`KernelPlan`] fixes everything about one gate application that does not
//! depend on amplitude values: how the targets split around the SIMD lane
//! region, the masks that expand a loop counter into a base index, and the
//! list of non-zero matrix scalars with their kinds. Executing a plan walks
//! the loop counter `t` over `[0, 2^(n-k-s))`; every `t` owns one group of
//! `2^k` amplitude vectors of `2^s` lanes each.

use std::fmt;

use crate::error::{Error, Result};
use crate::gatecore::{deposit_bits, sparsity_profile, Gate, GateMatrix, ScalarKind, Tolerances};
use crate::sim::{Real, Statevector};

/// Split of the target qubits into the lower (intra-vector) and higher
/// (address-generating) sides for a vector of `2^s` lanes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitSplit {
    pub s: usize,
    /// Target qubits on the lower side.
    pub lower: Vec<usize>,
    /// Target qubits on the higher side.
    pub higher: Vec<usize>,
    /// Non-target qubit indices inside the lower region (the SIMD lanes).
    pub lanes: Vec<usize>,
}

impl QubitSplit {
    pub fn k_lower(&self) -> usize {
        self.lower.len()
    }

    pub fn k_higher(&self) -> usize {
        self.higher.len()
    }

    /// Number of index bits below the higher side: `k_L + s`.
    pub fn lower_region_size(&self) -> usize {
        self.lower.len() + self.s
    }
}

/// Colors the targets, marks the `s` smallest non-target indices as lanes,
/// and puts every index up to the largest lane index on the lower side.
pub fn split_qubits(targets: &[usize], s: usize) -> QubitSplit {
    let mut lanes = Vec::with_capacity(s);
    let mut idx = 0;
    while lanes.len() < s {
        if !targets.contains(&idx) {
            lanes.push(idx);
        }
        idx += 1;
    }
    let (lower, higher) = match lanes.last() {
        Some(&edge) => targets.iter().partition(|&&q| q < edge),
        None => (Vec::new(), targets.to_vec()),
    };
    QubitSplit {
        s,
        lower,
        higher,
        lanes,
    }
}

/// Disjoint bit masks over the loop counter. Summing `(t & masks[i]) << i`
/// inserts a zero at every higher-target position of the vector index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskTable {
    pub masks: Vec<u64>,
    /// Width of the loop counter, `n - k - s`.
    pub t_bits: usize,
}

impl MaskTable {
    #[inline]
    pub fn start_index(&self, t: u64) -> u64 {
        self.masks
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &m)| acc + ((t & m) << i))
    }

    pub fn t_count(&self) -> u64 {
        1u64 << self.t_bits
    }
}

fn bit_range(lo: usize, hi: usize) -> u64 {
    let ones = |w: usize| if w >= 64 { u64::MAX } else { (1u64 << w) - 1 };
    if hi <= lo {
        0
    } else {
        ones(hi) & !ones(lo)
    }
}

pub fn build_masks(split: &QubitSplit, n: usize) -> Result<MaskTable> {
    let k = split.lower.len() + split.higher.len();
    if k + split.s > n {
        return Err(Error::Kernel(format!(
            "gate of {k} qubits with s={} does not fit {n} qubits",
            split.s
        )));
    }
    let t_bits = n - k - split.s;
    let region = split.lower_region_size();
    let p: Vec<usize> = split.higher.iter().map(|&q| q - region).collect();
    let mut masks = Vec::with_capacity(p.len() + 1);
    let mut lo = 0;
    for (i, &pi) in p.iter().enumerate() {
        let hi = pi - i;
        masks.push(bit_range(lo, hi.min(t_bits)));
        lo = hi;
    }
    masks.push(bit_range(lo, t_bits));
    Ok(MaskTable { masks, t_bits })
}

/// One non-zero matrix entry and the kinds of its two scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryOp {
    pub row: usize,
    pub col: usize,
    pub re_kind: ScalarKind,
    pub im_kind: ScalarKind,
    pub re: f64,
    pub im: f64,
}

/// Immutable, sparsity-specialized recipe for applying one gate.
#[derive(Debug, Clone)]
pub struct KernelPlan {
    gate: Gate,
    n: usize,
    split: QubitSplit,
    masks: MaskTable,
    entry_ops: Vec<EntryOp>,
    /// `row_starts[r]..row_starts[r + 1]` indexes the entries of row `r`.
    row_starts: Vec<usize>,
    kinds: Vec<[ScalarKind; 2]>,
    tolerances: Tolerances,
    runtime_matrix: bool,
    /// Amplitude offset of each matrix index within a group.
    combo_offsets: Vec<usize>,
    /// Amplitude offset of each SIMD lane within a group.
    lane_offsets: Vec<usize>,
}

pub fn plan_kernel(
    g: &Gate,
    n: usize,
    s: usize,
    tol: Tolerances,
    runtime_matrix: bool,
) -> Result<KernelPlan> {
    if let Some(&q) = g.targets().iter().find(|&&q| q >= n) {
        return Err(Error::Kernel(format!("target {q} outside {n}-qubit state")));
    }
    let split = split_qubits(g.targets(), s);
    let masks = build_masks(&split, n)?;
    let profile = sparsity_profile(g.matrix(), tol.zero, tol.one);
    let dim = g.matrix().dim();
    let mut entry_ops = Vec::new();
    let mut row_starts = Vec::with_capacity(dim + 1);
    for row in 0..dim {
        row_starts.push(entry_ops.len());
        for col in 0..dim {
            let [re_kind, im_kind] = profile.kinds[row * dim + col];
            if re_kind.is_zero() && im_kind.is_zero() {
                continue;
            }
            let z = g.matrix().get(row, col);
            entry_ops.push(EntryOp {
                row,
                col,
                re_kind,
                im_kind,
                re: z.re,
                im: z.im,
            });
        }
    }
    row_starts.push(entry_ops.len());
    let combo_offsets = (0..dim).map(|a| deposit_bits(a, g.targets())).collect();
    let lane_offsets = (0..1usize << s)
        .map(|l| deposit_bits(l, &split.lanes))
        .collect();
    Ok(KernelPlan {
        gate: g.clone(),
        n,
        split,
        masks,
        entry_ops,
        row_starts,
        kinds: profile.kinds,
        tolerances: tol,
        runtime_matrix,
        combo_offsets,
        lane_offsets,
    })
}

impl KernelPlan {
    pub fn gate(&self) -> &Gate {
        &self.gate
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn split(&self) -> &QubitSplit {
        &self.split
    }

    pub fn mask_table(&self) -> &MaskTable {
        &self.masks
    }

    pub fn entry_ops(&self) -> &[EntryOp] {
        &self.entry_ops
    }

    pub fn runtime_matrix(&self) -> bool {
        self.runtime_matrix
    }

    /// Size of the loop counter domain, `2^(n-k-s)`.
    pub fn t_count(&self) -> u64 {
        self.masks.t_count()
    }

    /// Amplitude indices touched by loop iteration `t`, in matrix-index-major
    /// then lane order.
    pub fn group_indices(&self, t: u64) -> Vec<usize> {
        let base = (self.masks.start_index(t) as usize) << self.split.lower_region_size();
        self.combo_offsets
            .iter()
            .flat_map(|&c| self.lane_offsets.iter().map(move |&l| base + c + l))
            .collect()
    }

    /// Binds matrix values in working precision. Baked plans use the
    /// planned gate; runtime plans take `matrix_override`, whose sparsity
    /// pattern must match the plan.
    pub fn bind<T: Real>(
        &self,
        matrix_override: Option<&GateMatrix>,
    ) -> Result<BoundKernel<'_, T>> {
        let coeff = |kinds: (ScalarKind, ScalarKind), re: f64, im: f64, col: usize| Coeff {
            col,
            code: kind_code(kinds.0) * 4 + kind_code(kinds.1),
            re: T::from_f64(re),
            im: T::from_f64(im),
        };
        let coeffs = match (self.runtime_matrix, matrix_override) {
            (false, None) => self
                .entry_ops
                .iter()
                .map(|e| coeff((e.re_kind, e.im_kind), e.re, e.im, e.col))
                .collect(),
            (true, Some(m)) => {
                if m.k() != self.gate.k() {
                    return Err(Error::Kernel(format!(
                        "override is a {}-qubit matrix, plan expects {}",
                        m.k(),
                        self.gate.k()
                    )));
                }
                let p = sparsity_profile(m, self.tolerances.zero, self.tolerances.one);
                if p.kinds != self.kinds {
                    return Err(Error::Kernel(
                        "override matrix does not match the planned sparsity pattern".into(),
                    ));
                }
                self.entry_ops
                    .iter()
                    .map(|e| {
                        let z = m.get(e.row, e.col);
                        coeff((e.re_kind, e.im_kind), z.re, z.im, e.col)
                    })
                    .collect()
            }
            (false, Some(_)) => {
                return Err(Error::Kernel(
                    "plan has baked matrix values; override not accepted".into(),
                ))
            }
            (true, None) => {
                return Err(Error::Kernel(
                    "runtime-matrix plan needs a matrix at call time".into(),
                ))
            }
        };
        Ok(BoundKernel { plan: self, coeffs })
    }
}

impl fmt::Display for KernelPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "gate {} targets {:?}", self.gate, self.gate.targets())?;
        writeln!(
            f,
            "n={} k={} s={} runtime_matrix={}",
            self.n,
            self.gate.k(),
            self.split.s,
            self.runtime_matrix
        )?;
        writeln!(
            f,
            "lower {:?} higher {:?} lanes {:?} k_L={} k_H={}",
            self.split.lower,
            self.split.higher,
            self.split.lanes,
            self.split.k_lower(),
            self.split.k_higher()
        )?;
        let width = self.masks.t_bits.max(1);
        for (i, m) in self.masks.masks.iter().enumerate() {
            writeln!(f, "mask[{i}] {m:0width$b}")?;
        }
        writeln!(f, "entries {}", self.entry_ops.len())?;
        for e in &self.entry_ops {
            writeln!(
                f,
                "  ({}, {}) {:?}/{:?} {:?},{:?}",
                e.row, e.col, e.re_kind, e.im_kind, e.re, e.im
            )?;
        }
        Ok(())
    }
}

const ZERO: u8 = 0;
const ONE: u8 = 1;
const MINUS: u8 = 2;
const GENERAL: u8 = 3;

fn kind_code(k: ScalarKind) -> u8 {
    match k {
        ScalarKind::Zero => ZERO,
        ScalarKind::One => ONE,
        ScalarKind::MinusOne => MINUS,
        ScalarKind::General => GENERAL,
    }
}

#[derive(Debug, Clone, Copy)]
struct Coeff<T> {
    col: usize,
    /// `4 * re_kind + im_kind`
    code: u8,
    re: T,
    im: T,
}

/// Raw amplitude arrays shared by workers that touch disjoint index sets.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AmpPtrs<T> {
    pub re: *mut T,
    pub im: *mut T,
    pub len: usize,
}

// SAFETY: workers only dereference indices of their own disjoint t-range.
unsafe impl<T: Send> Send for AmpPtrs<T> {}
unsafe impl<T: Sync> Sync for AmpPtrs<T> {}

impl<T: Real> AmpPtrs<T> {
    pub fn of(state: &mut Statevector<T>) -> Self {
        let (re, im) = state.parts_mut();
        AmpPtrs {
            len: re.len(),
            re: re.as_mut_ptr(),
            im: im.as_mut_ptr(),
        }
    }
}

/// A plan with matrix values bound in working precision, ready to run.
pub struct BoundKernel<'p, T> {
    plan: &'p KernelPlan,
    coeffs: Vec<Coeff<T>>,
}

#[inline(always)]
fn madd<T: Real>(a: T, x: T, y: T) -> T {
    if cfg!(target_feature = "fma") {
        a.mul_add(x, y)
    } else {
        a * x + y
    }
}

/// Lanes accumulated in registers per pass over a matrix row.
const CHUNK: usize = 16;

/// `y += (a + ib) * x` over one chunk, specialized on the scalar kinds.
#[inline(always)]
fn accumulate<T: Real, const RK: u8, const IK: u8>(
    a: T,
    b: T,
    xr: &[T; CHUNK],
    xi: &[T; CHUNK],
    yr: &mut [T; CHUNK],
    yi: &mut [T; CHUNK],
) {
    for j in 0..CHUNK {
        let (mut r, mut i) = (yr[j], yi[j]);
        match RK {
            ONE => {
                r = r + xr[j];
                i = i + xi[j];
            }
            MINUS => {
                r = r - xr[j];
                i = i - xi[j];
            }
            GENERAL => {
                r = madd(a, xr[j], r);
                i = madd(a, xi[j], i);
            }
            _ => {}
        }
        match IK {
            ONE => {
                r = r - xi[j];
                i = i + xr[j];
            }
            MINUS => {
                r = r + xi[j];
                i = i - xr[j];
            }
            GENERAL => {
                r = madd(-b, xi[j], r);
                i = madd(b, xr[j], i);
            }
            _ => {}
        }
        yr[j] = r;
        yi[j] = i;
    }
}

macro_rules! dispatch {
    ($code:expr, $a:expr, $b:expr, $xr:expr, $xi:expr, $yr:expr, $yi:expr;
     $($rk:ident $ik:ident),*) => {
        match $code {
            $(c if c == $rk * 4 + $ik => accumulate::<T, $rk, $ik>($a, $b, $xr, $xi, $yr, $yi),)*
            _ => {}
        }
    };
}

/// Upper bound on `2^k * batch` scalars per scratch array.
const SCRATCH_SCALARS: usize = 4096;
const MAX_BATCH: usize = 512;

impl<T: Real> BoundKernel<'_, T> {
    pub fn plan(&self) -> &KernelPlan {
        self.plan
    }

    /// Applies the gate to loop iterations `[t_begin, t_end)`.
    pub fn apply(&self, state: &mut Statevector<T>, t_begin: u64, t_end: u64) -> Result<()> {
        if state.n() != self.plan.n {
            return Err(Error::Dimension(format!(
                "plan built for {} qubits, state has {}",
                self.plan.n,
                state.n()
            )));
        }
        self.check_range(t_begin, t_end)?;
        let ptrs = AmpPtrs::of(state);
        // SAFETY: exclusive borrow of the whole state; indices are in range.
        unsafe { self.apply_raw(ptrs, t_begin, t_end) };
        Ok(())
    }

    pub(crate) fn check_range(&self, t_begin: u64, t_end: u64) -> Result<()> {
        if t_begin > t_end || t_end > self.plan.t_count() {
            return Err(Error::Kernel(format!(
                "loop range [{t_begin}, {t_end}) outside [0, {})",
                self.plan.t_count()
            )));
        }
        Ok(())
    }

    /// # Safety
    ///
    /// `ptrs` must address a live `2^n` amplitude state, and no other thread
    /// may concurrently touch the groups of `[t_begin, t_end)`.
    pub(crate) unsafe fn apply_raw(&self, ptrs: AmpPtrs<T>, t_begin: u64, t_end: u64) {
        let plan = self.plan;
        debug_assert_eq!(ptrs.len, 1usize << plan.n);
        let dim = plan.combo_offsets.len();
        let lanes = plan.lane_offsets.len();
        let batch = (SCRATCH_SCALARS / (dim * lanes)).clamp(1, MAX_BATCH);
        let width = batch * lanes;
        // rows are padded to whole chunks; padding lanes compute on stale
        // values and are never scattered
        let stride = width.next_multiple_of(CHUNK);
        let mut in_re = vec![T::zero(); dim * stride];
        let mut in_im = vec![T::zero(); dim * stride];
        let mut out_re = vec![T::zero(); dim * stride];
        let mut out_im = vec![T::zero(); dim * stride];
        let mut bases = vec![0usize; batch];
        let shift = plan.split.lower_region_size();
        // With no targets among the lanes, consecutive loop iterations address
        // consecutive lane blocks until the lowest target bit flips. Runs
        // shorter than a chunk are gathered element by element instead.
        let run = match plan.split.k_lower() {
            0 => 1u64 << (plan.gate.targets()[0] - plan.split.s),
            _ => 0,
        };
        let run = if run * lanes as u64 >= CHUNK as u64 {
            run
        } else {
            0
        };

        let mut t = t_begin;
        while t < t_end {
            let mut nb = ((t_end - t) as usize).min(batch);
            if run > 1 {
                nb = nb.min((run - t % run) as usize);
            }
            let w = nb * lanes;
            for (b, base) in bases[..nb].iter_mut().enumerate() {
                *base = (plan.masks.start_index(t + b as u64) as usize) << shift;
            }
            // gather
            for (c, &co) in plan.combo_offsets.iter().enumerate() {
                let row = &mut in_re[c * stride..c * stride + w];
                let rowi = &mut in_im[c * stride..c * stride + w];
                if run > 1 {
                    let src = bases[0] + co;
                    row.copy_from_slice(std::slice::from_raw_parts(ptrs.re.add(src), w));
                    rowi.copy_from_slice(std::slice::from_raw_parts(ptrs.im.add(src), w));
                } else {
                    for (b, &base) in bases[..nb].iter().enumerate() {
                        for (l, &lo) in plan.lane_offsets.iter().enumerate() {
                            row[b * lanes + l] = *ptrs.re.add(base + co + lo);
                            rowi[b * lanes + l] = *ptrs.im.add(base + co + lo);
                        }
                    }
                }
            }
            // multiply
            let padded = w.next_multiple_of(CHUNK);
            for r in 0..dim {
                let coeffs = &self.coeffs[plan.row_starts[r]..plan.row_starts[r + 1]];
                for j in (0..padded).step_by(CHUNK) {
                    let mut yr = [T::zero(); CHUNK];
                    let mut yi = [T::zero(); CHUNK];
                    for cf in coeffs {
                        let at = cf.col * stride + j;
                        let xr: &[T; CHUNK] = in_re[at..at + CHUNK].try_into().unwrap();
                        let xi: &[T; CHUNK] = in_im[at..at + CHUNK].try_into().unwrap();
                        dispatch!(cf.code, cf.re, cf.im, xr, xi, &mut yr, &mut yi;
                            ZERO ONE, ZERO MINUS, ZERO GENERAL,
                            ONE ZERO, ONE ONE, ONE MINUS, ONE GENERAL,
                            MINUS ZERO, MINUS ONE, MINUS MINUS, MINUS GENERAL,
                            GENERAL ZERO, GENERAL ONE, GENERAL MINUS, GENERAL GENERAL);
                    }
                    let at = r * stride + j;
                    out_re[at..at + CHUNK].copy_from_slice(&yr);
                    out_im[at..at + CHUNK].copy_from_slice(&yi);
                }
            }
            // scatter
            for (c, &co) in plan.combo_offsets.iter().enumerate() {
                let row = &out_re[c * stride..c * stride + w];
                let rowi = &out_im[c * stride..c * stride + w];
                if run > 1 {
                    let dst = bases[0] + co;
                    std::slice::from_raw_parts_mut(ptrs.re.add(dst), w).copy_from_slice(row);
                    std::slice::from_raw_parts_mut(ptrs.im.add(dst), w).copy_from_slice(rowi);
                } else {
                    for (b, &base) in bases[..nb].iter().enumerate() {
                        for (l, &lo) in plan.lane_offsets.iter().enumerate() {
                            *ptrs.re.add(base + co + lo) = row[b * lanes + l];
                            *ptrs.im.add(base + co + lo) = rowi[b * lanes + l];
                        }
                    }
                }
            }
            t += nb as u64;
        }
    }
}

/// Applies `plan` to loop iterations `[t_begin, t_end)` of `state`.
pub fn apply_kernel<T: Real>(
    plan: &KernelPlan,
    state: &mut Statevector<T>,
    matrix_override: Option<&GateMatrix>,
    t_begin: u64,
    t_end: u64,
) -> Result<()> {
    plan.bind::<T>(matrix_override)?
        .apply(state, t_begin, t_end)
}

/// Unspecialized oracle: `2^(n-k)` dense matrix-vector products.
pub fn reference_apply<T: Real>(g: &Gate, state: &mut Statevector<T>) -> Result<()> {
    let n = state.n();
    if let Some(&q) = g.targets().iter().find(|&&q| q >= n) {
        return Err(Error::Dimension(format!(
            "target {q} outside {n}-qubit state"
        )));
    }
    let m = g.matrix();
    let dim = m.dim();
    let mask = g.targets().iter().fold(0usize, |acc, &q| acc | (1 << q));
    let offsets: Vec<usize> = (0..dim).map(|a| deposit_bits(a, g.targets())).collect();
    let mre: Vec<T> = m.entries().iter().map(|z| T::from_f64(z.re)).collect();
    let mim: Vec<T> = m.entries().iter().map(|z| T::from_f64(z.im)).collect();
    let mut vr = vec![T::zero(); dim];
    let mut vi = vec![T::zero(); dim];
    let (re, im) = state.parts_mut();
    for base in (0..re.len()).filter(|b| b & mask == 0) {
        for (a, &o) in offsets.iter().enumerate() {
            vr[a] = re[base + o];
            vi[a] = im[base + o];
        }
        for (r, &o) in offsets.iter().enumerate() {
            let (mut sr, mut si) = (T::zero(), T::zero());
            for c in 0..dim {
                let (ar, ai) = (mre[r * dim + c], mim[r * dim + c]);
                sr = sr + ar * vr[c] - ai * vi[c];
                si = si + ar * vi[c] + ai * vr[c];
            }
            re[base + o] = sr;
            im[base + o] = si;
        }
    }
    Ok(())
}
