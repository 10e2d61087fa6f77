//! Gate matrices, per-scalar sparsity classification, and the fusion algebra.
//!
//! All matrices use the little-endian convention: bit `j` of a row or column
//! index belongs to the `j`-th entry of the (sorted) target list.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One matrix entry or amplitude in double precision.
pub type ComplexScalar = Complex64;

/// Largest gate the optimizer will materialize. A dense 12-qubit matrix is
/// 256 MiB in double precision.
pub const FUSION_HARD_CAP: usize = 12;

/// Classification of one real component of a matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    Zero,
    One,
    MinusOne,
    General,
}

impl ScalarKind {
    pub fn is_zero(self) -> bool {
        self == ScalarKind::Zero
    }

    /// Runtime operations charged for a scalar of this kind.
    pub fn op_cost(self) -> u64 {
        match self {
            ScalarKind::Zero => 0,
            ScalarKind::One | ScalarKind::MinusOne => 1,
            ScalarKind::General => 2,
        }
    }
}

/// Zero and one tolerances used for scalar classification.
///
/// A `one` tolerance of exactly `0.0` turns the ±1 classification off, so
/// every non-zero scalar is charged as a general multiply-add.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub zero: f64,
    pub one: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            zero: 1e-8,
            one: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn new(zero: f64, one: f64) -> Result<Self> {
        if !(zero >= 0.0 && zero.is_finite()) || !(one >= 0.0 && one.is_finite()) {
            return Err(Error::Config(format!(
                "tolerances must be finite and non-negative (zero={zero}, one={one})"
            )));
        }
        Ok(Tolerances { zero, one })
    }
}

/// Classifies a real scalar. Precedence is Zero, One, MinusOne, General.
pub fn classify_scalar(x: f64, zero_tol: f64, one_tol: f64) -> ScalarKind {
    if x.abs() <= zero_tol {
        ScalarKind::Zero
    } else if one_tol > 0.0 && (x - 1.0).abs() <= one_tol {
        ScalarKind::One
    } else if one_tol > 0.0 && (x + 1.0).abs() <= one_tol {
        ScalarKind::MinusOne
    } else {
        ScalarKind::General
    }
}

/// Dense row-major `2^k x 2^k` complex matrix.
#[derive(Clone, PartialEq)]
pub struct GateMatrix {
    k: usize,
    entries: Vec<ComplexScalar>,
}

impl GateMatrix {
    pub fn new(k: usize, entries: Vec<ComplexScalar>) -> Result<Self> {
        if k > FUSION_HARD_CAP {
            return Err(Error::InvalidGate(format!(
                "{k}-qubit matrix exceeds the {FUSION_HARD_CAP}-qubit cap"
            )));
        }
        let dim = 1usize << k;
        if entries.len() != dim * dim {
            return Err(Error::InvalidGate(format!(
                "{k}-qubit matrix needs {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if let Some(bad) = entries
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidGate(format!(
                "non-finite entry at ({}, {})",
                bad / dim,
                bad % dim
            )));
        }
        Ok(GateMatrix { k, entries })
    }

    /// Builds a matrix from row slices; convenient for literal matrices.
    pub fn from_rows(rows: &[&[ComplexScalar]]) -> Result<Self> {
        let dim = rows.len();
        if !dim.is_power_of_two() || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidGate(
                "matrix must be square with power-of-two size".into(),
            ));
        }
        let k = dim.trailing_zeros() as usize;
        GateMatrix::new(k, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn identity(k: usize) -> Self {
        let dim = 1usize << k;
        let mut entries = vec![ComplexScalar::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ComplexScalar::new(1.0, 0.0);
        }
        GateMatrix { k, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        1 << self.k
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> ComplexScalar {
        self.entries[row * self.dim() + col]
    }

    pub fn entries(&self) -> &[ComplexScalar] {
        &self.entries
    }

    pub fn row(&self, row: usize) -> &[ComplexScalar] {
        let dim = self.dim();
        &self.entries[row * dim..(row + 1) * dim]
    }

    /// Dense product `self * rhs`.
    pub fn matmul(&self, rhs: &GateMatrix) -> Result<GateMatrix> {
        if self.k != rhs.k {
            return Err(Error::Dimension(format!(
                "cannot multiply {}-qubit by {}-qubit matrix",
                self.k, rhs.k
            )));
        }
        let dim = self.dim();
        let mut out = vec![ComplexScalar::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for l in 0..dim {
                let a = self.entries[i * dim + l];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.entries[l * dim..(l + 1) * dim];
                for (o, b) in out[i * dim..(i + 1) * dim].iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(GateMatrix {
            k: self.k,
            entries: out,
        })
    }

    pub fn adjoint(&self) -> GateMatrix {
        let dim = self.dim();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(self.entries[j * dim + i].conj());
            }
        }
        GateMatrix { k: self.k, entries }
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &GateMatrix) -> f64 {
        if self.k != other.k {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        is_unitary(self, tol)
    }
}

impl fmt::Debug for GateMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "GateMatrix(k={})", self.k)?;
        for r in 0..self.dim() {
            let row: Vec<String> = self
                .row(r)
                .iter()
                .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// True iff `max |M M^dagger - I| <= tol` elementwise.
pub fn is_unitary(m: &GateMatrix, tol: f64) -> bool {
    let dim = m.dim();
    for i in 0..dim {
        let ri = m.row(i);
        for j in 0..dim {
            let rj = m.row(j);
            let dot: ComplexScalar = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            if (dot - ComplexScalar::new(expect, 0.0)).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Human-readable origin of a gate: name, parameters, and operand order as
/// written in the circuit file.
#[derive(Debug, Clone, PartialEq)]
pub struct GateLabel {
    pub name: String,
    pub params: Vec<f64>,
    pub operands: Vec<usize>,
}

impl fmt::Display for GateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|p| format!("{p:?}")).collect();
            write!(f, "({})", ps.join(","))?;
        }
        for q in &self.operands {
            write!(f, " {q}")?;
        }
        Ok(())
    }
}

/// A unitary bound to a strictly increasing list of target qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    matrix: GateMatrix,
    targets: Vec<usize>,
    label: Option<GateLabel>,
}

impl Gate {
    pub fn new(matrix: GateMatrix, targets: Vec<usize>) -> Result<Self> {
        if targets.len() != matrix.k() {
            return Err(Error::InvalidGate(format!(
                "{}-qubit matrix bound to {} targets",
                matrix.k(),
                targets.len()
            )));
        }
        if targets.is_empty() {
            return Err(Error::InvalidGate("gate needs at least one target".into()));
        }
        if targets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGate(format!(
                "targets {targets:?} must be strictly increasing"
            )));
        }
        Ok(Gate {
            matrix,
            targets,
            label: None,
        })
    }

    pub fn with_label(mut self, label: GateLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn matrix(&self) -> &GateMatrix {
        &self.matrix
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn k(&self) -> usize {
        self.targets.len()
    }

    pub fn label(&self) -> Option<&GateLabel> {
        self.label.as_ref()
    }

    pub fn profile(&self, tol: Tolerances) -> SparsityProfile {
        sparsity_profile(&self.matrix, tol.zero, tol.one)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => write!(f, "{l}"),
            None => {
                write!(f, "u{}", self.k())?;
                for q in &self.targets {
                    write!(f, " {q}")?;
                }
                Ok(())
            }
        }
    }
}

/// Per-scalar classification of a matrix and its operation count.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityProfile {
    /// `[re, im]` kinds of every entry, row-major.
    pub kinds: Vec<[ScalarKind; 2]>,
    pub zero_scalars: usize,
    pub unit_scalars: usize,
    pub general_scalars: usize,
    pub op_count: u64,
}

impl SparsityProfile {
    pub fn nonzero_scalars(&self) -> usize {
        self.unit_scalars + self.general_scalars
    }

    pub fn op_count(&self) -> u64 {
        self.op_count
    }
}

pub fn sparsity_profile(m: &GateMatrix, zero_tol: f64, one_tol: f64) -> SparsityProfile {
    let mut p = SparsityProfile {
        kinds: Vec::with_capacity(m.entries.len()),
        zero_scalars: 0,
        unit_scalars: 0,
        general_scalars: 0,
        op_count: 0,
    };
    for z in &m.entries {
        let pair = [
            classify_scalar(z.re, zero_tol, one_tol),
            classify_scalar(z.im, zero_tol, one_tol),
        ];
        for kind in pair {
            match kind {
                ScalarKind::Zero => p.zero_scalars += 1,
                ScalarKind::One | ScalarKind::MinusOne => p.unit_scalars += 1,
                ScalarKind::General => p.general_scalars += 1,
            }
        }
        p.kinds.push(pair);
    }
    p.op_count = op_count(&p);
    p
}

/// Two operations per general scalar, one per ±1 scalar, none for zeros.
pub fn op_count(profile: &SparsityProfile) -> u64 {
    2 * profile.general_scalars as u64 + profile.unit_scalars as u64
}

/// Position of each qubit of `sub` inside the sorted list `union`.
pub(crate) fn positions_in(sub: &[usize], union: &[usize]) -> Result<Vec<usize>> {
    sub.iter()
        .map(|q| union.binary_search(q).ok())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::NotSubset {
            targets: sub.to_vec(),
            union: union.to_vec(),
        })
}

/// Scatters the low bits of `x` into the bit positions `pos` (software PDEP).
#[inline]
pub(crate) fn deposit_bits(x: usize, pos: &[usize]) -> usize {
    pos.iter()
        .enumerate()
        .fold(0, |acc, (j, &p)| acc | (((x >> j) & 1) << p))
}

pub fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

/// Embeds `g` into the operator space of `union_targets`, acting as the
/// identity on the extra qubits.
pub fn expand_gate(g: &Gate, union_targets: &[usize]) -> Result<GateMatrix> {
    if union_targets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGate(format!(
            "union {union_targets:?} must be strictly increasing"
        )));
    }
    let pos = positions_in(g.targets(), union_targets)?;
    let u = union_targets.len();
    if u > FUSION_HARD_CAP {
        return Err(Error::FusionTooLarge {
            size: u,
            cap: FUSION_HARD_CAP,
        });
    }
    let dim = 1usize << u;
    let gdim = g.matrix.dim();
    let mask = pos.iter().fold(0, |m, &p| m | (1usize << p));
    let offsets: Vec<usize> = (0..gdim).map(|a| deposit_bits(a, &pos)).collect();
    let mut entries = vec![ComplexScalar::new(0.0, 0.0); dim * dim];
    for base in (0..dim).filter(|b| b & mask == 0) {
        for (a, &oa) in offsets.iter().enumerate() {
            for (b, &ob) in offsets.iter().enumerate() {
                entries[(base | oa) * dim + (base | ob)] = g.matrix.get(a, b);
            }
        }
    }
    Ok(GateMatrix { k: u, entries })
}

/// In place `m <- expand(g) * m`, where `g` acts on index bits `pos` of `m`.
fn apply_left(m: &mut GateMatrix, g: &GateMatrix, pos: &[usize]) {
    let dim = m.dim();
    let gdim = g.dim();
    let mask = pos.iter().fold(0, |acc, &p| acc | (1usize << p));
    let offsets: Vec<usize> = (0..gdim).map(|a| deposit_bits(a, pos)).collect();
    let mut gathered = vec![ComplexScalar::new(0.0, 0.0); gdim];
    for base in (0..dim).filter(|b| b & mask == 0) {
        for col in 0..dim {
            for (a, &oa) in offsets.iter().enumerate() {
                gathered[a] = m.entries[(base | oa) * dim + col];
            }
            for (a, &oa) in offsets.iter().enumerate() {
                let acc: ComplexScalar = g.row(a).iter().zip(&gathered).map(|(x, y)| x * y).sum();
                m.entries[(base | oa) * dim + col] = acc;
            }
        }
    }
}

/// Fuses two gates; `first` is applied earlier in time, so the result is
/// `expand(second) * expand(first)` over the union of their targets.
pub fn fuse_matrices(first: &Gate, second: &Gate) -> Result<Gate> {
    fuse_matrices_capped(first, second, FUSION_HARD_CAP)
}

pub fn fuse_matrices_capped(first: &Gate, second: &Gate, cap: usize) -> Result<Gate> {
    let union = sorted_union(first.targets(), second.targets());
    if union.len() > cap.min(FUSION_HARD_CAP) {
        return Err(Error::FusionTooLarge {
            size: union.len(),
            cap: cap.min(FUSION_HARD_CAP),
        });
    }
    let mut m = expand_gate(first, &union)?;
    let pos = positions_in(second.targets(), &union)?;
    apply_left(&mut m, second.matrix(), &pos);
    Gate::new(m, union)
}

/// Fuses a time-ordered gate sequence into one gate over the union of all
/// targets.
pub fn fuse_sequence(gates: &[Gate]) -> Result<Gate> {
    let mut union: Vec<usize> = Vec::new();
    for g in gates {
        union = sorted_union(&union, g.targets());
    }
    if union.is_empty() {
        return Err(Error::InvalidGate(
            "cannot fuse an empty gate sequence".into(),
        ));
    }
    if union.len() > FUSION_HARD_CAP {
        return Err(Error::FusionTooLarge {
            size: union.len(),
            cap: FUSION_HARD_CAP,
        });
    }
    let mut m = GateMatrix::identity(union.len());
    for g in gates {
        let pos = positions_in(g.targets(), &union)?;
        apply_left(&mut m, g.matrix(), &pos);
    }
    Gate::new(m, union)
}

/// Random unitary from Gram-Schmidt orthonormalization of a complex Gaussian
/// matrix.
pub fn random_unitary<R: Rng + ?Sized>(k: usize, rng: &mut R) -> GateMatrix {
    let dim = 1usize << k;
    // columns[c][r]
    let mut cols: Vec<Vec<ComplexScalar>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| ComplexScalar::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    for c in 0..dim {
        for p in 0..c {
            let (done, rest) = cols.split_at_mut(c);
            let proj: ComplexScalar = done[p]
                .iter()
                .zip(&rest[0])
                .map(|(a, b)| a.conj() * b)
                .sum();
            for (x, q) in rest[0].iter_mut().zip(&done[p]) {
                *x -= proj * q;
            }
        }
        let norm = cols[c].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for x in cols[c].iter_mut() {
            *x /= norm;
        }
    }
    let mut entries = vec![ComplexScalar::new(0.0, 0.0); dim * dim];
    for (c, col) in cols.iter().enumerate() {
        for (r, z) in col.iter().enumerate() {
            entries[r * dim + c] = *z;
        }
    }
    GateMatrix { k, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> ComplexScalar {
        ComplexScalar::new(re, im)
    }

    fn x() -> GateMatrix {
        GateMatrix::from_rows(&[&[c(0., 0.), c(1., 0.)], &[c(1., 0.), c(0., 0.)]]).unwrap()
    }

    fn z() -> GateMatrix {
        GateMatrix::from_rows(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(-1., 0.)]]).unwrap()
    }

    fn h() -> GateMatrix {
        let s = FRAC_1_SQRT_2;
        GateMatrix::from_rows(&[&[c(s, 0.), c(s, 0.)], &[c(s, 0.), c(-s, 0.)]]).unwrap()
    }

    // Kronecker product with `hi` on the more significant bits.
    fn kron(hi: &GateMatrix, lo: &GateMatrix) -> GateMatrix {
        let (dh, dl) = (hi.dim(), lo.dim());
        let dim = dh * dl;
        let mut e = vec![c(0., 0.); dim * dim];
        for a in 0..dh {
            for b in 0..dh {
                for p in 0..dl {
                    for q in 0..dl {
                        e[(a * dl + p) * dim + (b * dl + q)] = hi.get(a, b) * lo.get(p, q);
                    }
                }
            }
        }
        GateMatrix::new(hi.k() + lo.k(), e).unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_scalar(0.0, 1e-8, 1e-8), ScalarKind::Zero);
        assert_eq!(classify_scalar(1.0, 1e-8, 1e-8), ScalarKind::One);
        assert_eq!(classify_scalar(-1.0, 1e-8, 1e-8), ScalarKind::MinusOne);
        assert_eq!(
            classify_scalar(FRAC_1_SQRT_2, 1e-8, 1e-8),
            ScalarKind::General
        );
        // overlapping bands resolve in precedence order
        assert_eq!(classify_scalar(0.4, 0.5, 0.7), ScalarKind::Zero);
        assert_eq!(classify_scalar(0.6, 0.5, 2.0), ScalarKind::One);
    }

    #[test]
    fn one_tolerance_zero_disables_unit_discount() {
        assert_eq!(classify_scalar(1.0, 1e-8, 0.0), ScalarKind::General);
        let p = sparsity_profile(&x(), 1e-8, 0.0);
        assert_eq!(p.op_count, 4);
        let p = sparsity_profile(&x(), 1e-8, 1e-8);
        assert_eq!(p.op_count, 2);
        assert_eq!(p.nonzero_scalars(), 2);
    }

    #[test]
    fn hadamard_and_identity_profiles() {
        let p = sparsity_profile(&h(), 1e-8, 1e-8);
        assert_eq!(p.nonzero_scalars(), 4);
        assert_eq!(p.op_count, 8);
        assert_eq!(
            sparsity_profile(&GateMatrix::identity(1), 1e-8, 1e-8).op_count,
            2
        );
    }

    #[test]
    fn dense_op_count_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=4 {
            let m = random_unitary(k, &mut rng);
            assert_eq!(sparsity_profile(&m, 1e-8, 0.0).op_count, 1 << (2 * k + 2));
        }
    }

    #[test]
    fn expand_matches_kronecker_oracle() {
        let xg = Gate::new(x(), vec![0]).unwrap();
        assert_eq!(expand_gate(&xg, &[0]).unwrap(), x());
        assert_eq!(
            expand_gate(&xg, &[0, 1]).unwrap(),
            kron(&GateMatrix::identity(1), &x())
        );
        let zg = Gate::new(z(), vec![1]).unwrap();
        let e = expand_gate(&zg, &[0, 1]).unwrap();
        assert_eq!(e, kron(&z(), &GateMatrix::identity(1)));
        let diag: Vec<f64> = (0..4).map(|i| e.get(i, i).re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
        assert!(matches!(
            expand_gate(&zg, &[0, 2]),
            Err(Error::NotSubset { .. })
        ));
    }

    #[test]
    fn fuse_examples() {
        let hg = Gate::new(h(), vec![0]).unwrap();
        let hh = fuse_matrices(&hg, &hg).unwrap();
        assert!(hh.matrix().max_abs_diff(&GateMatrix::identity(1)) < 1e-15);

        let xg = Gate::new(x(), vec![0]).unwrap();
        let zg = Gate::new(z(), vec![1]).unwrap();
        let f = fuse_matrices(&xg, &zg).unwrap();
        let oracle = expand_gate(&zg, &[0, 1])
            .unwrap()
            .matmul(&expand_gate(&xg, &[0, 1]).unwrap())
            .unwrap();
        assert_eq!(f.targets(), &[0, 1]);
        assert!(f.matrix().max_abs_diff(&oracle) < 1e-15);

        let mut cx = vec![c(0., 0.); 16];
        for (r, cc) in [(0, 0), (1, 3), (2, 2), (3, 1)] {
            cx[r * 4 + cc] = c(1., 0.);
        }
        let cxg = Gate::new(GateMatrix::new(2, cx).unwrap(), vec![0, 1]).unwrap();
        let ff = fuse_matrices(&cxg, &cxg).unwrap();
        assert_eq!(ff.matrix(), &GateMatrix::identity(2));
    }

    #[test]
    fn fuse_respects_cap() {
        let a = Gate::new(GateMatrix::identity(2), vec![0, 1]).unwrap();
        let b = Gate::new(GateMatrix::identity(2), vec![2, 3]).unwrap();
        assert!(matches!(
            fuse_matrices_capped(&a, &b, 3),
            Err(Error::FusionTooLarge { size: 4, cap: 3 })
        ));
    }

    #[test]
    fn unitarity_checks() {
        assert!(is_unitary(&h(), 1e-10));
        let ones = GateMatrix::new(1, vec![c(1., 0.); 4]).unwrap();
        assert!(!is_unitary(&ones, 1e-10));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut acc = Gate::new(random_unitary(2, &mut rng), vec![0, 1]).unwrap();
        for i in 0..20 {
            let t = vec![i % 3, i % 3 + 1];
            let g = Gate::new(random_unitary(2, &mut rng), t).unwrap();
            acc = fuse_matrices(&acc, &g).unwrap();
        }
        assert!(is_unitary(acc.matrix(), 1e-9));
    }

    #[test]
    fn fuse_sequence_matches_pairwise_fold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gates: Vec<Gate> = [vec![0], vec![1, 3], vec![0, 1], vec![3]]
            .into_iter()
            .map(|t| Gate::new(random_unitary(t.len(), &mut rng), t).unwrap())
            .collect();
        let folded = gates[1..]
            .iter()
            .fold(gates[0].clone(), |acc, g| fuse_matrices(&acc, g).unwrap());
        let seq = fuse_sequence(&gates).unwrap();
        assert_eq!(seq.targets(), folded.targets());
        assert!(seq.matrix().max_abs_diff(folded.matrix()) < 1e-13);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(GateMatrix::new(1, vec![c(0., 0.); 3]).is_err());
        assert!(
            GateMatrix::new(1, vec![c(f64::NAN, 0.), c(0., 0.), c(0., 0.), c(1., 0.)]).is_err()
        );
        assert!(Gate::new(GateMatrix::identity(2), vec![1, 0]).is_err());
        assert!(Gate::new(GateMatrix::identity(2), vec![1]).is_err());
    }
}
