//! Extraction-sequence perturbations with slope repair.
//!
//! Advancing a block drags its violated predecessors along (the inverted
//! cone); delaying drags violated successors (the cone). The `SamePeriod`
//! scope moves the block's whole same-period cone with it before repairing,
//! the `Violated` scope repairs only what the move breaks.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::evaluator::Footprint;
use crate::model::{BlockId, MiningComplexInstance, Solution, NOT_MINED};

use super::{BlockChoice, MoveCtx, ShiftMode, UndoToken};

const SAMPLE_RETRIES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeScope {
    /// Repair only blocks whose slope constraint the move violates.
    Violated,
    /// Move the block together with the predecessors (advance) or
    /// successors (delay) currently sharing its period, then repair.
    SamePeriod,
}

/// Tracks first-touch periods so a move can be undone bit-exactly.
struct Touched {
    old: BTreeMap<BlockId, u32>,
}

impl Touched {
    fn new() -> Self {
        Self { old: BTreeMap::new() }
    }

    fn set(&mut self, sol: &mut Solution, b: BlockId, t: u32) {
        self.old.entry(b).or_insert_with(|| sol.raw_period(b));
        sol.set_period(b, t);
    }

    fn finish(self, sol: &Solution) -> Option<(Footprint, UndoToken)> {
        let mut moves = Vec::new();
        let mut undo = Vec::new();
        for (b, old) in self.old {
            let new = sol.raw_period(b);
            if new != old {
                moves.push((b, old, new));
                undo.push((b, old));
            }
        }
        if moves.is_empty() {
            return None;
        }
        Some((
            Footprint { block_moves: moves, ..Default::default() },
            UndoToken::Blocks(undo),
        ))
    }
}

/// Moves block `b` to `new_period` (1-based; `NOT_MINED` unmines it) and
/// repairs every violated slope constraint. Returns `None` when the move is
/// the identity.
pub fn shift_block(
    inst: &MiningComplexInstance,
    sol: &mut Solution,
    b: BlockId,
    new_period: u32,
    scope: ConeScope,
) -> Option<(Footprint, UndoToken)> {
    let old = sol.raw_period(b);
    if old == new_period {
        return None;
    }
    let mut touched = Touched::new();
    if new_period == NOT_MINED {
        unmine_with_cone(inst, sol, &mut touched, b);
    } else if old == NOT_MINED || new_period < old {
        advance(inst, sol, &mut touched, b, new_period, old, scope);
    } else {
        delay(inst, sol, &mut touched, b, new_period, old, scope);
    }
    touched.finish(sol)
}

/// Toggles a block between mined and not mined.
pub fn toggle_block(
    inst: &MiningComplexInstance,
    sol: &mut Solution,
    b: BlockId,
    period_if_mined: u32,
) -> Option<(Footprint, UndoToken)> {
    match sol.raw_period(b) {
        NOT_MINED => shift_block(inst, sol, b, period_if_mined, ConeScope::Violated),
        _ => shift_block(inst, sol, b, NOT_MINED, ConeScope::Violated),
    }
}

fn advance(
    inst: &MiningComplexInstance,
    sol: &mut Solution,
    touched: &mut Touched,
    b: BlockId,
    target: u32,
    old: u32,
    scope: ConeScope,
) {
    let mut work: Vec<BlockId> = Vec::new();
    touched.set(sol, b, target);
    work.push(b);
    if scope == ConeScope::SamePeriod && old != NOT_MINED {
        // Same-period inverted cone: predecessors extracted with b.
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            for &p in &inst.blocks[x as usize].preds {
                if sol.raw_period(p) == old {
                    touched.set(sol, p, target);
                    work.push(p);
                    stack.push(p);
                }
            }
        }
    }
    while let Some(x) = work.pop() {
        let tx = sol.raw_period(x);
        for &p in &inst.blocks[x as usize].preds {
            let tp = sol.raw_period(p);
            if tp == NOT_MINED || tp > tx {
                touched.set(sol, p, tx);
                work.push(p);
            }
        }
    }
}

fn delay(
    inst: &MiningComplexInstance,
    sol: &mut Solution,
    touched: &mut Touched,
    b: BlockId,
    target: u32,
    old: u32,
    scope: ConeScope,
) {
    let mut work: Vec<BlockId> = Vec::new();
    touched.set(sol, b, target);
    work.push(b);
    if scope == ConeScope::SamePeriod {
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            for &c in &inst.succs[x as usize] {
                if sol.raw_period(c) == old {
                    touched.set(sol, c, target);
                    work.push(c);
                    stack.push(c);
                }
            }
        }
    }
    while let Some(x) = work.pop() {
        let tx = sol.raw_period(x);
        for &c in &inst.succs[x as usize] {
            let tc = sol.raw_period(c);
            if tc != NOT_MINED && tc < tx {
                touched.set(sol, c, tx);
                work.push(c);
            }
        }
    }
}

fn unmine_with_cone(
    inst: &MiningComplexInstance,
    sol: &mut Solution,
    touched: &mut Touched,
    b: BlockId,
) {
    let mut work = vec![b];
    touched.set(sol, b, NOT_MINED);
    while let Some(x) = work.pop() {
        for &c in &inst.succs[x as usize] {
            if sol.raw_period(c) != NOT_MINED {
                touched.set(sol, c, NOT_MINED);
                work.push(c);
            }
        }
    }
}

fn sample_block<R: Rng>(
    ctx: &MoveCtx<'_>,
    sol: &Solution,
    choice: BlockChoice,
    any_block: bool,
    rng: &mut R,
) -> Option<BlockId> {
    if any_block {
        // Toggle works on the full block set.
        if choice == BlockChoice::DeviationBiased {
            if let Some(t) = ctx.worst_period() {
                let list = ctx.mined.blocks_at(t);
                if !list.is_empty() {
                    return Some(list[rng.gen_range(0..list.len())]);
                }
            }
        }
        return Some(rng.gen_range(0..ctx.inst.num_blocks()) as BlockId);
    }
    let total = ctx.mined.mined_count();
    if total == 0 {
        return None;
    }
    if choice == BlockChoice::DeviationBiased {
        if let Some(t) = ctx.worst_period() {
            let list = ctx.mined.blocks_at(t);
            if !list.is_empty() {
                return Some(list[rng.gen_range(0..list.len())]);
            }
        }
    }
    let mut k = rng.gen_range(0..total);
    for t in 1..=sol.horizon() as u32 {
        let list = ctx.mined.blocks_at(t);
        if k < list.len() {
            return Some(list[k]);
        }
        k -= list.len();
    }
    None
}

pub(super) fn perturb_extraction<R: Rng>(
    ctx: &MoveCtx<'_>,
    sol: &mut Solution,
    mode: ShiftMode,
    scope: ConeScope,
    choice: BlockChoice,
    rng: &mut R,
) -> Option<(Footprint, UndoToken)> {
    let t_max = ctx.inst.horizon as u32;
    for _ in 0..SAMPLE_RETRIES {
        let b = match sample_block(ctx, sol, choice, mode == ShiftMode::Toggle, rng) {
            Some(b) => b,
            None => return None,
        };
        let old = sol.raw_period(b);
        let proposal = match mode {
            ShiftMode::Advance1 => (old > 1).then(|| old - 1),
            ShiftMode::Delay1 => (old != NOT_MINED && old < t_max).then(|| old + 1),
            ShiftMode::UniformRandom => {
                if old == NOT_MINED || t_max < 2 {
                    None
                } else {
                    // Uniform over the other periods.
                    let mut t = rng.gen_range(1..t_max);
                    if t >= old {
                        t += 1;
                    }
                    Some(t)
                }
            }
            ShiftMode::Jump2 => {
                if old == NOT_MINED {
                    None
                } else {
                    let up = rng.gen_bool(0.5);
                    let cand = if up { old.saturating_add(2).min(t_max) } else { old.saturating_sub(2).max(1) };
                    (cand != old).then_some(cand)
                }
            }
            ShiftMode::Toggle => {
                if old == NOT_MINED {
                    Some(rng.gen_range(1..=t_max))
                } else {
                    Some(NOT_MINED)
                }
            }
        };
        let Some(new) = proposal else { continue };
        if let Some(done) = shift_block(ctx.inst, sol, b, new, scope) {
            return Some(done);
        }
    }
    None
}
