//! `CircuitTile`: a grid of rows, one column per qubit, where every cell holds
//! an optional reference to a [`GateBlock`]. Row order is time order; blocks
//! in the same row have disjoint wires and therefore commute.
//!
//! The fusion pass walks the tile row by row. A block whose cells are all
//! vacant in the next row sinks into it; vertically adjacent blocks that share
//! a wire are tested for consecutive fusion, and horizontally adjacent blocks
//! in one row are tested for commuting fusion.

use std::cell::OnceCell;
use std::collections::HashSet;
use std::fmt;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gatecore::{fuse_sequence, sorted_union, Gate, GateMatrix, SparsityProfile, Tolerances};

pub type BlockId = usize;

/// An aggregate of gates fused into one operator over the union of their
/// wires. The fused matrix is materialized on first use.
#[derive(Debug, Clone)]
pub struct GateBlock {
    id: BlockId,
    gates: Vec<Gate>,
    wires: Vec<usize>,
    fused: OnceCell<Gate>,
}

impl GateBlock {
    fn new(id: BlockId, gates: Vec<Gate>) -> Self {
        let wires = gates
            .iter()
            .fold(Vec::new(), |acc, g| sorted_union(&acc, g.targets()));
        GateBlock {
            id,
            gates,
            wires,
            fused: OnceCell::new(),
        }
    }

    pub fn id(&self) -> BlockId {
        self.id
    }

    /// Constituent gates in time order.
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn wires(&self) -> &[usize] {
        &self.wires
    }

    /// Number of qubits the fused block acts on.
    pub fn size(&self) -> usize {
        self.wires.len()
    }

    pub fn is_materialized(&self) -> bool {
        self.fused.get().is_some()
    }

    /// The block as a single gate. A singleton block is its original gate.
    pub fn fused_gate(&self) -> Result<&Gate> {
        if let Some(g) = self.fused.get() {
            return Ok(g);
        }
        let g = if self.gates.len() == 1 {
            self.gates[0].clone()
        } else {
            fuse_sequence(&self.gates)?
        };
        Ok(self.fused.get_or_init(|| g))
    }

    pub fn matrix(&self) -> Result<&GateMatrix> {
        Ok(self.fused_gate()?.matrix())
    }

    pub fn profile(&self, tol: Tolerances) -> Result<SparsityProfile> {
        Ok(self.fused_gate()?.profile(tol))
    }

    fn min_wire(&self) -> usize {
        self.wires[0]
    }
}

/// Decides whether two blocks may fuse. `top` is earlier in time (or, for
/// same-row pairs, the left block).
pub trait Fusibility {
    fn fusible(&mut self, top: &GateBlock, bot: &GateBlock) -> bool;

    /// Fused gate computed while deciding the last accepted pair, if any.
    fn take_product(&mut self) -> Option<Gate> {
        None
    }
}

impl<F> Fusibility for F
where
    F: FnMut(&GateBlock, &GateBlock) -> bool,
{
    fn fusible(&mut self, top: &GateBlock, bot: &GateBlock) -> bool {
        self(top, bot)
    }
}

#[derive(Debug, Clone)]
struct Placed {
    block: GateBlock,
    row: usize,
}

#[derive(Debug, Clone)]
pub struct CircuitTile {
    n_qubits: usize,
    rows: Vec<Vec<Option<BlockId>>>,
    /// Indexed by block id; `None` once a block is fused away.
    slots: Vec<Option<Placed>>,
}

impl CircuitTile {
    pub fn new(n_qubits: usize) -> Self {
        CircuitTile {
            n_qubits,
            rows: Vec::new(),
            slots: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cell(&self, row: usize, qubit: usize) -> Option<BlockId> {
        self.rows.get(row).and_then(|r| r[qubit])
    }

    pub fn block(&self, id: BlockId) -> Option<&GateBlock> {
        self.slots.get(id)?.as_ref().map(|p| &p.block)
    }

    pub fn row_of(&self, id: BlockId) -> Option<usize> {
        self.slots.get(id)?.as_ref().map(|p| p.row)
    }

    /// Live blocks in row order, ascending minimum wire within a row.
    pub fn blocks(&self) -> Vec<&GateBlock> {
        let mut out = Vec::new();
        for row in &self.rows {
            let mut seen: Vec<BlockId> = Vec::new();
            for id in row.iter().flatten() {
                if !seen.contains(id) {
                    seen.push(*id);
                }
            }
            // the first cell of a block is its minimum wire
            out.extend(
                seen.into_iter()
                    .map(|id| self.block(id).expect("live block")),
            );
        }
        out
    }

    pub fn block_count(&self) -> usize {
        self.slots.iter().flatten().count()
    }

    /// Total constituent gates across all blocks.
    pub fn gate_count(&self) -> usize {
        self.slots
            .iter()
            .flatten()
            .map(|p| p.block.gates.len())
            .sum()
    }

    fn placed(&self, id: BlockId) -> &Placed {
        self.slots[id].as_ref().expect("live block")
    }

    fn wires_free(&self, row: usize, wires: &[usize]) -> bool {
        wires.iter().all(|&w| self.rows[row][w].is_none())
    }

    fn set_cells(&mut self, row: usize, id: BlockId, wires: &[usize], value: Option<BlockId>) {
        for &w in wires {
            debug_assert!(value.is_none() || self.rows[row][w].is_none());
            debug_assert!(value.is_some() || self.rows[row][w] == Some(id));
            self.rows[row][w] = value;
        }
    }

    fn insert_row(&mut self, at: usize) {
        self.rows.insert(at, vec![None; self.n_qubits]);
        for p in self.slots.iter_mut().flatten() {
            if p.row >= at {
                p.row += 1;
            }
        }
    }

    fn take_block(&mut self, id: BlockId) -> Placed {
        let placed = self.slots[id].take().expect("live block");
        let wires = placed.block.wires.clone();
        self.set_cells(placed.row, id, &wires, None);
        placed
    }

    fn place(&mut self, block: GateBlock, row: usize) -> BlockId {
        let id = block.id;
        let wires = block.wires.clone();
        self.set_cells(row, id, &wires, Some(id));
        self.slots[id] = Some(Placed { block, row });
        id
    }

    /// Appends a block of `gates` directly below the last occupied row on
    /// any of its wires, adding a row when needed.
    pub fn append_block(&mut self, gates: Vec<Gate>) -> Result<BlockId> {
        if gates.is_empty() {
            return Err(Error::InvalidGate("a block needs at least one gate".into()));
        }
        let id = self.slots.len();
        let block = GateBlock::new(id, gates);
        if let Some(&q) = block.wires.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::InvalidGate(format!(
                "wire {q} outside {}-qubit tile",
                self.n_qubits
            )));
        }
        let row = block
            .wires
            .iter()
            .filter_map(|&w| {
                (0..self.rows.len())
                    .rev()
                    .find(|&r| self.rows[r][w].is_some())
            })
            .max()
            .map_or(0, |r| r + 1);
        if row == self.rows.len() {
            self.rows.push(vec![None; self.n_qubits]);
        }
        self.slots.push(None);
        Ok(self.place(block, row))
    }

    /// Moves a block one row down when all of its cells there are vacant.
    pub fn move_block_down(&mut self, id: BlockId) -> bool {
        let Some(Placed { block, row }) = self.slots.get(id).and_then(Option::as_ref) else {
            return false;
        };
        let (row, wires) = (*row, block.wires.clone());
        if row + 1 >= self.rows.len() || !self.wires_free(row + 1, &wires) {
            return false;
        }
        self.set_cells(row, id, &wires, None);
        self.set_cells(row + 1, id, &wires, Some(id));
        self.slots[id].as_mut().expect("live block").row = row + 1;
        true
    }

    /// Replaces `top` and `bot` by their fusion and returns the new block.
    ///
    /// The pair must share a row, or sit in consecutive rows with at least one
    /// common wire. The result goes to the lower of the two rows if its wires
    /// are free there, else to the upper row, else to a new row in between.
    pub fn fuse_blocks(
        &mut self,
        top: BlockId,
        bot: BlockId,
        product: Option<Gate>,
    ) -> Result<BlockId> {
        let (rt, rb) = match (self.row_of(top), self.row_of(bot)) {
            (Some(a), Some(b)) if top != bot => (a, b),
            _ => {
                return Err(Error::InvalidGate(format!(
                    "cannot fuse blocks {top} and {bot}"
                )))
            }
        };
        let (first, second, upper) = if rt == rb {
            let (a, b) = (&self.placed(top).block, &self.placed(bot).block);
            if a.min_wire() <= b.min_wire() {
                (top, bot, rt)
            } else {
                (bot, top, rt)
            }
        } else if rb == rt + 1 {
            let (a, b) = (&self.placed(top).block, &self.placed(bot).block);
            if !a.wires.iter().any(|w| b.wires.binary_search(w).is_ok()) {
                return Err(Error::InvalidGate(format!(
                    "blocks {top} and {bot} in consecutive rows share no wire"
                )));
            }
            (top, bot, rt)
        } else {
            return Err(Error::InvalidGate(format!(
                "blocks {top} (row {rt}) and {bot} (row {rb}) are not adjacent"
            )));
        };
        let first = self.take_block(first).block;
        let second = self.take_block(second).block;
        let mut gates = first.gates;
        gates.extend(second.gates);
        let id = self.slots.len();
        let block = GateBlock::new(id, gates);
        if let Some(g) = product {
            debug_assert_eq!(g.targets(), block.wires.as_slice());
            let _ = block.fused.set(g);
        }
        let lower = upper + 1;
        let row = if lower < self.rows.len() && self.wires_free(lower, &block.wires) {
            lower
        } else if self.wires_free(upper, &block.wires) {
            upper
        } else {
            self.insert_row(lower);
            lower
        };
        self.slots.push(None);
        Ok(self.place(block, row))
    }

    /// Sinks blocks into vacancies until nothing moves, then drops empty rows.
    pub fn compress(&mut self) {
        loop {
            let mut moved = false;
            for r in (0..self.rows.len().saturating_sub(1)).rev() {
                for q in 0..self.n_qubits {
                    if let Some(id) = self.rows[r][q] {
                        moved |= self.move_block_down(id);
                    }
                }
            }
            if !moved {
                break;
            }
        }
        let keep: Vec<bool> = self
            .rows
            .iter()
            .map(|r| r.iter().any(Option::is_some))
            .collect();
        if keep.iter().all(|&k| k) {
            return;
        }
        let mut new_index = Vec::with_capacity(keep.len());
        let mut next = 0;
        for &k in &keep {
            new_index.push(next);
            next += k as usize;
        }
        let mut i = 0;
        self.rows.retain(|_| {
            i += 1;
            keep[i - 1]
        });
        for p in self.slots.iter_mut().flatten() {
            p.row = new_index[p.row];
        }
    }

    /// One fusion pass over the tile. Returns true iff any pair fused.
    pub fn traverse<F: Fusibility + ?Sized>(&mut self, policy: &mut F) -> bool {
        let mut fused_any = false;
        let mut tested: HashSet<(BlockId, BlockId)> = HashSet::new();
        let n = self.n_qubits;
        let mut r = 0;
        while r < self.rows.len() {
            for q in 0..n {
                let Some(top) = self.rows[r][q] else { continue };
                let mut row = r;
                if self.move_block_down(top) {
                    row += 1;
                }
                let Some(bot) = self.cell(row + 1, q) else {
                    continue;
                };
                if tested.insert((top, bot))
                    && policy.fusible(&self.placed(top).block, &self.placed(bot).block)
                {
                    let product = policy.take_product();
                    self.fuse_blocks(top, bot, product)
                        .expect("vertically adjacent blocks share a wire");
                    fused_any = true;
                }
            }
            for q in 1..n {
                let (Some(left), Some(right)) = (self.rows[r][q - 1], self.rows[r][q]) else {
                    continue;
                };
                if left != right
                    && tested.insert((left, right))
                    && policy.fusible(&self.placed(left).block, &self.placed(right).block)
                {
                    let product = policy.take_product();
                    self.fuse_blocks(left, right, product)
                        .expect("same-row blocks are always fusible geometrically");
                    fused_any = true;
                }
            }
            r += 1;
        }
        self.compress();
        fused_any
    }

    /// One gate per block, row by row.
    pub fn flatten(&self) -> Result<Circuit> {
        let gates = self
            .blocks()
            .into_iter()
            .map(|b| b.fused_gate().cloned())
            .collect::<Result<Vec<_>>>()?;
        Circuit::from_gates(self.n_qubits, gates)
    }

    /// Checks that the cell map and the block wire sets agree.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let mut cells = 0;
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.n_qubits {
                return Err(format!("row {r} has {} cells", row.len()));
            }
            for (q, cell) in row.iter().enumerate() {
                let Some(id) = *cell else { continue };
                cells += 1;
                let p = self
                    .slots
                    .get(id)
                    .and_then(Option::as_ref)
                    .ok_or(format!("cell ({r},{q}) references dead block {id}"))?;
                if p.row != r {
                    return Err(format!(
                        "block {id} recorded in row {} but found in {r}",
                        p.row
                    ));
                }
                if p.block.wires.binary_search(&q).is_err() {
                    return Err(format!("cell ({r},{q}) not a wire of block {id}"));
                }
            }
        }
        let mut wires = 0;
        for (id, p) in self.slots.iter().enumerate() {
            let Some(p) = p else { continue };
            if p.block.id != id {
                return Err(format!("slot {id} holds block {}", p.block.id));
            }
            for &w in &p.block.wires {
                if self.rows.get(p.row).and_then(|row| row[w]) != Some(id) {
                    return Err(format!("block {id} missing from cell ({},{w})", p.row));
                }
            }
            wires += p.block.wires.len();
        }
        if cells != wires {
            return Err(format!("{cells} occupied cells for {wires} block wires"));
        }
        Ok(())
    }
}

/// One singleton block per gate, appended in program order.
pub fn build_tile(c: &Circuit) -> CircuitTile {
    let mut t = CircuitTile::new(c.n_qubits());
    for g in c.gates() {
        t.append_block(vec![g.clone()])
            .expect("circuit gates are within range");
    }
    t
}

impl fmt::Display for CircuitTile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.slots.len().saturating_sub(1).to_string().len();
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Some(id) => format!("{id:>width$}"),
                    None => format!("{:>width$}", "."),
                })
                .collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        for b in self.blocks() {
            let gates: Vec<String> = b.gates.iter().map(ToString::to_string).collect();
            writeln!(f, "{}: {}", b.id, gates.join(" @ "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::named_gate;

    fn gate(name: &str, ops: &[usize]) -> Gate {
        named_gate(name, &[], ops).unwrap()
    }

    fn tile(n: usize, gates: &[(&str, &[usize])]) -> CircuitTile {
        let c = Circuit::from_gates(n, gates.iter().map(|(g, o)| gate(g, o)).collect()).unwrap();
        build_tile(&c)
    }

    fn size_only(k: usize) -> impl FnMut(&GateBlock, &GateBlock) -> bool {
        move |a: &GateBlock, b: &GateBlock| sorted_union(a.wires(), b.wires()).len() <= k
    }

    #[test]
    fn build_places_blocks_in_uppermost_vacant_row() {
        let t = tile(2, &[("h", &[0]), ("h", &[1])]);
        assert_eq!(t.n_rows(), 1);
        let t = tile(2, &[("h", &[0]), ("x", &[0])]);
        assert_eq!(t.n_rows(), 2);
        assert_eq!(
            t.block(t.cell(1, 0).unwrap()).unwrap().gates()[0],
            gate("x", &[0])
        );
        let t = build_tile(&Circuit::new(3).unwrap());
        assert_eq!(t.n_rows(), 0);
    }

    #[test]
    fn append_examples() {
        let mut t = tile(2, &[("h", &[0])]);
        t.append_block(vec![gate("x", &[1])]).unwrap();
        assert_eq!(t.n_rows(), 1);
        t.append_block(vec![gate("x", &[0])]).unwrap();
        assert_eq!(t.n_rows(), 2);

        let mut t = tile(2, &[("h", &[0]), ("h", &[1])]);
        let id = t.append_block(vec![gate("cx", &[0, 1])]).unwrap();
        assert_eq!(t.row_of(id), Some(1));
        assert_eq!((t.cell(1, 0), t.cell(1, 1)), (Some(id), Some(id)));
        assert!(t.append_block(vec![gate("x", &[5])]).is_err());
    }

    #[test]
    fn move_down_fills_vacancy() {
        // block 0 on wire 0 row 0; row 1 only uses wire 1; block 2 spans
        // both wires in row 2, so block 0 and block 2 are two rows apart.
        let mut t = tile(2, &[("h", &[0]), ("h", &[1]), ("x", &[1]), ("cx", &[0, 1])]);
        assert_eq!(t.row_of(0), Some(0));
        assert_eq!(t.row_of(3), Some(2));
        assert!(t.move_block_down(0));
        assert_eq!(t.row_of(0), Some(1));
        assert_eq!(t.row_of(3).unwrap() - t.row_of(0).unwrap(), 1);
        t.check_consistency().unwrap();

        // occupied below
        assert!(!t.move_block_down(0));
        // last row
        assert!(!t.move_block_down(3));
    }

    #[test]
    fn consecutive_fusion_goes_to_lower_row() {
        let mut t = tile(1, &[("h", &[0]), ("x", &[0])]);
        let id = t.fuse_blocks(0, 1, None).unwrap();
        assert_eq!(t.row_of(id), Some(1));
        assert_eq!(t.block(id).unwrap().gates().len(), 2);
        t.check_consistency().unwrap();
    }

    #[test]
    fn fusion_falls_back_to_upper_row() {
        // row 0: cx(0,1); row 1: x(1) and z(0)
        let mut t = tile(2, &[("cx", &[0, 1]), ("x", &[1]), ("z", &[0])]);
        assert_eq!(t.row_of(2), Some(1));
        let id = t.fuse_blocks(0, 1, None).unwrap();
        assert_eq!(t.row_of(id), Some(0));
        t.check_consistency().unwrap();
    }

    #[test]
    fn fusion_inserts_row_when_both_blocked() {
        // row 0: a=x(0), b=cx(1,2); row 1: c=cx(0,1), d=x(2)
        let mut t = tile(
            3,
            &[("x", &[0]), ("cx", &[1, 2]), ("cx", &[0, 1]), ("x", &[2])],
        );
        assert_eq!(
            (t.row_of(0), t.row_of(1), t.row_of(2), t.row_of(3)),
            (Some(0), Some(0), Some(1), Some(1))
        );
        // fusing b (row 0) with c (row 1): union {0,1,2} blocked by a above and d below
        let id = t.fuse_blocks(1, 2, None).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.row_of(id), Some(1));
        assert_eq!(t.row_of(3), Some(2));
        t.check_consistency().unwrap();
    }

    #[test]
    fn rejects_non_adjacent_fusion() {
        let mut t = tile(2, &[("h", &[0]), ("x", &[0]), ("z", &[0])]);
        assert!(t.fuse_blocks(0, 2, None).is_err());
        let mut t = tile(2, &[("h", &[0]), ("h", &[1]), ("x", &[1])]);
        // block 0 (row 0, wire 0) and block 2 (row 1, wire 1) share no wire
        assert!(t.fuse_blocks(0, 2, None).is_err());
    }

    #[test]
    fn compress_examples() {
        let mut t = tile(2, &[("h", &[0]), ("x", &[0])]);
        t.insert_row(1);
        assert_eq!(t.n_rows(), 3);
        t.compress();
        assert_eq!(t.n_rows(), 2);
        t.check_consistency().unwrap();
        let before = t.to_string();
        t.compress();
        assert_eq!(t.to_string(), before);
    }

    #[test]
    fn compress_slides_block_into_hole() {
        // after fusing x(1)@cx... leave a hole that h(0) can slide into
        let mut t = tile(2, &[("h", &[0]), ("h", &[1]), ("x", &[1]), ("z", &[1])]);
        assert_eq!(t.n_rows(), 3);
        let id = t.fuse_blocks(1, 2, None).unwrap();
        let id = t.fuse_blocks(id, 3, None).unwrap();
        t.compress();
        assert_eq!(t.n_rows(), 1);
        assert_eq!(t.row_of(id), Some(0));
        assert_eq!(t.row_of(0), Some(0));
        t.check_consistency().unwrap();
    }

    #[test]
    fn traverse_examples() {
        let mut t = tile(1, &[("h", &[0]), ("x", &[0])]);
        assert!(t.traverse(&mut size_only(1)));
        assert_eq!(t.block_count(), 1);
        assert_eq!(t.gate_count(), 2);

        let mut t = tile(2, &[("h", &[0]), ("x", &[1])]);
        assert!(!t.traverse(&mut size_only(1)));
        assert_eq!(t.block_count(), 2);
        assert!(t.traverse(&mut size_only(2)));
        assert_eq!(t.block_count(), 1);
        assert_eq!(t.blocks()[0].size(), 2);
    }

    #[test]
    fn flatten_round_trip_and_empty() {
        let c = Circuit::from_gates(
            3,
            vec![
                gate("h", &[0]),
                gate("cx", &[0, 2]),
                gate("x", &[1]),
                gate("z", &[2]),
            ],
        )
        .unwrap();
        let t = build_tile(&c);
        let flat = t.flatten().unwrap();
        // same per-qubit order; here the order is identical gate for gate
        // except the commuting x(1), which shares row 0 with h(0)
        assert_eq!(flat.len(), c.len());
        for q in 0..3 {
            let on = |cc: &Circuit| -> Vec<Gate> {
                cc.gates()
                    .iter()
                    .filter(|g| g.targets().contains(&q))
                    .cloned()
                    .collect()
            };
            assert_eq!(on(&flat), on(&c));
        }
        assert!(build_tile(&Circuit::new(2).unwrap())
            .flatten()
            .unwrap()
            .is_empty());
    }

    #[test]
    fn debug_serialization() {
        let mut t = tile(2, &[("h", &[0]), ("x", &[0]), ("h", &[1])]);
        t.traverse(&mut size_only(1));
        let text = t.to_string();
        assert!(text.contains("h 0 @ x 0"), "{text}");
        assert!(text.lines().next().unwrap().split(' ').count() == 2);
    }
}
