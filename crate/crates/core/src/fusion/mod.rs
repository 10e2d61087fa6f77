//! Agglomerative gate fusion over a [`CircuitTile`].

mod cost;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

pub use cost::{
    bench_cost_model, estimate_cost, load_cost_model, save_cost_model, BenchOptions, CostModel,
    CostRecord, COST_MODEL_VERSION,
};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gatecore::{fuse_matrices_capped, sorted_union, Gate, Tolerances, FUSION_HARD_CAP};
use crate::tile::{build_tile, BlockId, Fusibility, GateBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionMode {
    None,
    SizeOnly,
    Adaptive,
}

impl FusionMode {
    pub fn name(self) -> &'static str {
        match self {
            FusionMode::None => "none",
            FusionMode::SizeOnly => "size-only",
            FusionMode::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FusionMode::None),
            "size-only" => Ok(FusionMode::SizeOnly),
            "adaptive" => Ok(FusionMode::Adaptive),
            other => Err(Error::Config(format!("unknown fusion mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// Largest fused gate, in qubits.
    pub k_max: usize,
    /// Adaptive mode only: upper bound on a fused gate's operation count.
    pub max_op_count: Option<u64>,
    pub mode: FusionMode,
    /// Grow the size limit from 2 up to `k_max` instead of using `k_max` at once.
    pub agglomerative: bool,
    /// Repeat traversals at each size until nothing fuses.
    pub multi_traversal: bool,
    pub tolerances: Tolerances,
    pub max_traversals: usize,
    /// Thread count used for cost-model lookups.
    pub threads: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig::size_only(5)
    }
}

impl FusionConfig {
    pub const DEFAULT_MAX_TRAVERSALS: usize = 64;

    pub fn none() -> Self {
        FusionConfig {
            mode: FusionMode::None,
            ..FusionConfig::size_only(1)
        }
    }

    pub fn size_only(k_max: usize) -> Self {
        FusionConfig {
            k_max,
            max_op_count: None,
            mode: FusionMode::SizeOnly,
            agglomerative: true,
            multi_traversal: true,
            tolerances: Tolerances::default(),
            max_traversals: Self::DEFAULT_MAX_TRAVERSALS,
            threads: 1,
        }
    }

    pub fn adaptive(k_max: usize, max_op_count: Option<u64>) -> Self {
        FusionConfig {
            max_op_count,
            mode: FusionMode::Adaptive,
            ..FusionConfig::size_only(k_max)
        }
    }

    /// Adaptive fusion up to 7 qubits with at most 4096 operations per gate.
    pub fn cpu_preset() -> Self {
        FusionConfig::adaptive(7, Some(4096))
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 || self.k_max > FUSION_HARD_CAP {
            return Err(Error::Config(format!(
                "k_max must be in 1..={FUSION_HARD_CAP}, got {}",
                self.k_max
            )));
        }
        if self.max_traversals == 0 {
            return Err(Error::Config("max_traversals must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        Ok(())
    }

    /// Size limits visited by the driver, in order.
    pub fn schedule(&self) -> std::ops::RangeInclusive<usize> {
        if self.agglomerative {
            self.k_max.min(2)..=self.k_max
        } else {
            self.k_max..=self.k_max
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FusionStats {
    pub original_gate_count: usize,
    pub fused_block_count: usize,
    pub compression_ratio: f64,
    pub total_op_count: u64,
    pub traversals: usize,
    pub fusion_time: Duration,
}

impl FusionStats {
    fn of(original: &Circuit, fused: &Circuit, tol: Tolerances) -> Self {
        FusionStats {
            original_gate_count: original.len(),
            fused_block_count: fused.len(),
            compression_ratio: if fused.is_empty() {
                1.0
            } else {
                original.len() as f64 / fused.len() as f64
            },
            total_op_count: fused.total_op_count(tol),
            ..FusionStats::default()
        }
    }
}

pub fn fusible_size_only(top: &GateBlock, bot: &GateBlock, k: usize) -> bool {
    union_size(top, bot) <= k
}

fn union_size(a: &GateBlock, b: &GateBlock) -> usize {
    sorted_union(a.wires(), b.wires()).len()
}

/// Cost-aware predicate. Rejections that do not depend on the size limit are
/// remembered by block-id pair so later passes skip the matrix product.
pub struct AdaptivePolicy<'a> {
    k: usize,
    cap: Option<u64>,
    cost_model: &'a CostModel,
    threads: usize,
    n: usize,
    tol: Tolerances,
    costs: HashMap<BlockId, Option<f64>>,
    rejected: HashSet<(BlockId, BlockId)>,
    product: Option<Gate>,
}

impl<'a> AdaptivePolicy<'a> {
    pub fn new(cfg: &FusionConfig, cost_model: &'a CostModel, n: usize) -> Self {
        AdaptivePolicy {
            k: cfg.k_max,
            cap: cfg.max_op_count,
            cost_model,
            threads: cfg.threads,
            n,
            tol: cfg.tolerances,
            costs: HashMap::new(),
            rejected: HashSet::new(),
            product: None,
        }
    }

    pub fn set_k(&mut self, k: usize) {
        self.k = k;
    }

    fn block_cost(&mut self, b: &GateBlock) -> Option<f64> {
        if let Some(&c) = self.costs.get(&b.id()) {
            return c;
        }
        let c = match estimate_cost(b, self.cost_model, self.threads, self.n, self.tol) {
            Ok(c) => Some(c),
            Err(e) => {
                log::debug!("block {}: {e}", b.id());
                None
            }
        };
        self.costs.insert(b.id(), c);
        c
    }

    fn decide(&mut self, top: &GateBlock, bot: &GateBlock) -> Option<Gate> {
        let product = fuse_matrices_capped(
            top.fused_gate().ok()?,
            bot.fused_gate().ok()?,
            FUSION_HARD_CAP,
        )
        .map_err(|e| log::debug!("blocks {} and {}: {e}", top.id(), bot.id()))
        .ok()?;
        let ops = product.profile(self.tol).op_count;
        if self.cap.is_some_and(|cap| ops > cap) {
            return None;
        }
        let fused = self
            .cost_model
            .estimate(product.k(), ops, self.threads, self.n)
            .map_err(|e| log::debug!("blocks {} and {}: {e}", top.id(), bot.id()))
            .ok()?;
        let separate = self.block_cost(top)? + self.block_cost(bot)?;
        (fused <= separate).then_some(product)
    }
}

impl Fusibility for AdaptivePolicy<'_> {
    fn fusible(&mut self, top: &GateBlock, bot: &GateBlock) -> bool {
        self.product = None;
        if !fusible_size_only(top, bot, self.k) || self.rejected.contains(&(top.id(), bot.id())) {
            return false;
        }
        match self.decide(top, bot) {
            Some(g) => {
                self.product = Some(g);
                true
            }
            None => {
                self.rejected.insert((top.id(), bot.id()));
                false
            }
        }
    }

    fn take_product(&mut self) -> Option<Gate> {
        self.product.take()
    }
}

/// Evaluates the adaptive rule for one pair.
pub fn fusible_adaptive(
    top: &GateBlock,
    bot: &GateBlock,
    k: usize,
    cost_model: &CostModel,
    cfg: &FusionConfig,
    n: usize,
) -> bool {
    let mut policy = AdaptivePolicy::new(cfg, cost_model, n);
    policy.set_k(k);
    policy.fusible(top, bot)
}

/// Fuses `c` per `cfg`. Adaptive mode requires a cost model.
pub fn run_fusion(
    c: &Circuit,
    cfg: &FusionConfig,
    cost_model: Option<&CostModel>,
) -> Result<(Circuit, FusionStats)> {
    cfg.validate()?;
    let started = Instant::now();
    if cfg.mode == FusionMode::None {
        let mut stats = FusionStats::of(c, c, cfg.tolerances);
        stats.fusion_time = started.elapsed();
        return Ok((c.clone(), stats));
    }
    let mut adaptive = match (cfg.mode, cost_model) {
        (FusionMode::Adaptive, Some(cm)) => Some(AdaptivePolicy::new(cfg, cm, c.n_qubits())),
        (FusionMode::Adaptive, None) => {
            return Err(Error::Config(
                "adaptive fusion requires a cost model".into(),
            ))
        }
        _ => None,
    };

    let mut tile = build_tile(c);
    let mut traversals = 0;
    for k in cfg.schedule() {
        for _ in 0..cfg.max_traversals {
            traversals += 1;
            let fused = match adaptive.as_mut() {
                Some(policy) => {
                    policy.set_k(k);
                    tile.traverse(policy)
                }
                None => {
                    tile.traverse(&mut |a: &GateBlock, b: &GateBlock| fusible_size_only(a, b, k))
                }
            };
            if !fused || !cfg.multi_traversal {
                break;
            }
        }
    }
    let fused = tile.flatten()?;
    let mut stats = FusionStats::of(c, &fused, cfg.tolerances);
    stats.traversals = traversals;
    stats.fusion_time = started.elapsed();
    log::debug!(
        "fusion: {} -> {} gates in {} traversals",
        stats.original_gate_count,
        stats.fused_block_count,
        traversals
    );
    Ok((fused, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{gen_benchmark, BenchmarkKind};
    use crate::sim::{reference_run, Statevector};

    fn chain(len: usize) -> Circuit {
        let mut c = Circuit::new(1).unwrap();
        for i in 0..len {
            c.add(if i % 2 == 0 { "h" } else { "t" }, &[], &[0])
                .unwrap();
        }
        c
    }

    fn assert_equivalent(a: &Circuit, b: &Circuit) {
        let mut x = Statevector::<f64>::zero(a.n_qubits()).unwrap();
        let mut y = x.clone();
        reference_run(a, &mut x).unwrap();
        reference_run(b, &mut y).unwrap();
        let d = crate::sim::compare_states(&x, &y).unwrap();
        assert!(d < 1e-12, "deviation {d}");
    }

    #[test]
    fn chain_collapses_to_one_block() {
        let c = chain(40);
        let (f, stats) = run_fusion(&c, &FusionConfig::size_only(1), None).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(stats.compression_ratio, 40.0);
        assert_equivalent(&c, &f);
    }

    #[test]
    fn qft3_fuses_into_single_gate() {
        let c = gen_benchmark(BenchmarkKind::Qft, 3, 1, 0).unwrap();
        let (f, stats) = run_fusion(&c, &FusionConfig::size_only(3), None).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.gates()[0].k(), 3);
        assert_eq!(stats.compression_ratio, 7.0);
        assert_equivalent(&c, &f);
    }

    #[test]
    fn mode_none_is_identity() {
        let c = gen_benchmark(BenchmarkKind::Rqc, 5, 4, 1).unwrap();
        let (f, stats) = run_fusion(&c, &FusionConfig::none(), None).unwrap();
        assert_eq!(f, c);
        assert_eq!(stats.compression_ratio, 1.0);
    }

    #[test]
    fn size_only_predicate_examples() {
        let mut t = crate::tile::CircuitTile::new(3);
        let a = t
            .append_block(vec![crate::circuit::named_gate("cx", &[], &[0, 1]).unwrap()])
            .unwrap();
        let b = t
            .append_block(vec![crate::circuit::named_gate("cx", &[], &[1, 2]).unwrap()])
            .unwrap();
        let c = t
            .append_block(vec![crate::circuit::named_gate("h", &[], &[0]).unwrap()])
            .unwrap();
        let d = t
            .append_block(vec![crate::circuit::named_gate("h", &[], &[0]).unwrap()])
            .unwrap();
        let (a, b, c, d) = (
            t.block(a).unwrap(),
            t.block(b).unwrap(),
            t.block(c).unwrap(),
            t.block(d).unwrap(),
        );
        assert!(!fusible_size_only(a, b, 2));
        assert!(fusible_size_only(a, b, 3));
        assert!(fusible_size_only(c, d, 1));
    }

    #[test]
    fn adaptive_without_model_is_config_error() {
        let c = chain(3);
        assert!(matches!(
            run_fusion(&c, &FusionConfig::cpu_preset(), None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn adaptive_respects_caps() {
        let cm = CostModel::flat(7);
        let c = gen_benchmark(BenchmarkKind::Ala, 8, 6, 2).unwrap();
        let cfg = FusionConfig::adaptive(6, Some(1024));
        let (f, _) = run_fusion(&c, &cfg, Some(&cm)).unwrap();
        for g in f.gates() {
            assert!(g.k() <= 6);
            assert!(g.profile(cfg.tolerances).op_count <= 1024);
        }
        assert_equivalent(&c, &f);
    }

    #[test]
    fn dense_3q_blocks_rejected_by_cpu_cap() {
        let mut rng = rand::rng();
        let mut t = crate::tile::CircuitTile::new(6);
        let u = crate::gatecore::random_unitary(3, &mut rng);
        let v = crate::gatecore::random_unitary(3, &mut rng);
        let a = t
            .append_block(vec![crate::circuit::matrix_gate(&[0, 1, 2], u).unwrap()])
            .unwrap();
        let b = t
            .append_block(vec![crate::circuit::matrix_gate(&[3, 4, 5], v).unwrap()])
            .unwrap();
        let cm = CostModel::flat(7);
        let cfg = FusionConfig::cpu_preset();
        assert!(!fusible_adaptive(
            t.block(a).unwrap(),
            t.block(b).unwrap(),
            7,
            &cm,
            &cfg,
            6
        ));
        let mut lenient = cfg.clone();
        lenient.max_op_count = None;
        assert!(fusible_adaptive(
            t.block(a).unwrap(),
            t.block(b).unwrap(),
            7,
            &cm,
            &lenient,
            6
        ));
    }

    #[test]
    fn diagonal_products_stay_fusible() {
        let mut t = crate::tile::CircuitTile::new(4);
        let a = t
            .append_block(vec![crate::circuit::named_gate("cz", &[], &[0, 1]).unwrap()])
            .unwrap();
        let b = t
            .append_block(vec![
                crate::circuit::named_gate("cp", &[0.3], &[1, 2]).unwrap()
            ])
            .unwrap();
        let cm = CostModel::flat(7);
        let cfg = FusionConfig::cpu_preset();
        assert!(fusible_adaptive(
            t.block(a).unwrap(),
            t.block(b).unwrap(),
            7,
            &cm,
            &cfg,
            4
        ));
    }

    #[test]
    fn k_max_one_agglomerative_runs() {
        let cfg = FusionConfig::size_only(1);
        assert_eq!(cfg.schedule(), 1..=1);
        assert_eq!(FusionConfig::size_only(5).schedule(), 2..=5);
        let mut single = FusionConfig::size_only(5);
        single.agglomerative = false;
        assert_eq!(single.schedule(), 5..=5);
    }

    #[test]
    fn config_validation() {
        assert!(FusionConfig::size_only(0).validate().is_err());
        assert!(FusionConfig::size_only(13).validate().is_err());
        assert!(FusionConfig::size_only(12).validate().is_ok());
        assert_eq!(
            "adaptive".parse::<FusionMode>().unwrap(),
            FusionMode::Adaptive
        );
        assert!("fast".parse::<FusionMode>().is_err());
    }
}
