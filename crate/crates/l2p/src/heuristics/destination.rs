//! Destination perturbations: single cluster switches and cut-off style
//! rewrites of a whole mine-period policy.

use std::collections::BTreeMap;

use rand::Rng;

use crate::evaluator::Footprint;
use crate::model::{GroupId, LocationKind, Solution};

use super::{weighted_choice, MoveCtx, SelectionBias, UndoToken};

const SAMPLE_RETRIES: usize = 16;

fn eligible_groups(ctx: &MoveCtx<'_>) -> Vec<GroupId> {
    ctx.inst.groups.iter().filter(|g| g.destinations.len() >= 2).map(|g| g.id).collect()
}

fn pick_period<R: Rng>(ctx: &MoveCtx<'_>, bias: SelectionBias, rng: &mut R) -> u32 {
    let t_max = ctx.inst.horizon as u32;
    if bias == SelectionBias::PeriodBiased {
        if let Some(pen) = ctx.penalty_by_period {
            if let Some(i) = weighted_choice(pen, rng) {
                return i as u32 + 1;
            }
        }
    }
    rng.gen_range(1..=t_max)
}

/// Sends one (or a small batch of) randomly selected cluster-period pair(s)
/// to a different allowed destination.
pub(super) fn perturb_cluster_destination<R: Rng>(
    ctx: &MoveCtx<'_>,
    sol: &mut Solution,
    bias: SelectionBias,
    batch: usize,
    rng: &mut R,
) -> Option<(Footprint, UndoToken)> {
    let eligible = eligible_groups(ctx);
    if eligible.is_empty() {
        return None;
    }
    let grade_weights: Vec<f64> = match bias {
        SelectionBias::GradeBiased => {
            eligible.iter().map(|&g| ctx.inst.groups[g as usize].mean_grade.max(0.0)).collect()
        }
        _ => Vec::new(),
    };
    let mut old: BTreeMap<(GroupId, u32), u32> = BTreeMap::new();
    for _ in 0..batch {
        let g = match bias {
            SelectionBias::GradeBiased => match weighted_choice(&grade_weights, rng) {
                Some(i) => eligible[i],
                None => eligible[rng.gen_range(0..eligible.len())],
            },
            _ => eligible[rng.gen_range(0..eligible.len())],
        };
        let t = pick_period(ctx, bias, rng);
        let group = &ctx.inst.groups[g as usize];
        let current = sol.destination(g, t);
        let alternatives: Vec<_> =
            group.destinations.iter().copied().filter(|&d| d != current).collect();
        if alternatives.is_empty() {
            continue;
        }
        let next = alternatives[rng.gen_range(0..alternatives.len())];
        old.entry((g, t)).or_insert(current);
        sol.set_destination(g, t, next);
    }
    let changes: Vec<(GroupId, u32, u32)> = old
        .iter()
        .filter(|&(&(g, t), &o)| sol.destination(g, t) != o)
        .map(|(&(g, t), &o)| (g, t, o))
        .collect();
    if changes.is_empty() {
        return None;
    }
    Some((
        Footprint {
            dest_changes: changes.iter().map(|&(g, t, _)| (g, t)).collect(),
            ..Default::default()
        },
        UndoToken::Destinations(changes),
    ))
}

/// Shifts the grade-rank cut-off of one mine in one period: groups below the
/// threshold route to waste, the rest to the designated processor.
pub(super) fn perturb_destination_policy<R: Rng>(
    ctx: &MoveCtx<'_>,
    sol: &mut Solution,
    shift: i32,
    processor_rank: usize,
    rng: &mut R,
) -> Option<(Footprint, UndoToken)> {
    let inst = ctx.inst;
    let processors = inst.location_by_kind(LocationKind::Processor);
    if processors.is_empty() {
        return None;
    }
    let target = processors[processor_rank.min(processors.len() - 1)];
    let mines_with_groups: Vec<u32> = inst
        .mines
        .iter()
        .copied()
        .filter(|&m| !inst.groups_by_grade[m as usize].is_empty())
        .collect();
    if mines_with_groups.is_empty() {
        return None;
    }
    let is_waste =
        |d: u32| inst.locations[d as usize].kind == LocationKind::WasteDump;

    for _ in 0..SAMPLE_RETRIES {
        let mine = mines_with_groups[rng.gen_range(0..mines_with_groups.len())];
        let t = rng.gen_range(1..=inst.horizon as u32);
        let ranked = &inst.groups_by_grade[mine as usize];
        let current_thr =
            ranked.iter().filter(|&&g| is_waste(sol.destination(g, t))).count() as i64;
        let new_thr = (current_thr + shift as i64).clamp(0, ranked.len() as i64);
        if new_thr == current_thr {
            continue; // clamped into a no-op
        }
        let mut changes: Vec<(GroupId, u32, u32)> = Vec::new();
        for (rank, &g) in ranked.iter().enumerate() {
            let dests = &inst.groups[g as usize].destinations;
            let desired = if (rank as i64) < new_thr {
                dests.iter().copied().find(|&d| is_waste(d))
            } else if dests.contains(&target) {
                Some(target)
            } else {
                dests
                    .iter()
                    .copied()
                    .find(|&d| inst.locations[d as usize].kind == LocationKind::Processor)
                    .or_else(|| dests.iter().copied().find(|&d| !is_waste(d)))
            };
            let Some(desired) = desired else { continue };
            let current = sol.destination(g, t);
            if current != desired {
                changes.push((g, t, current));
                sol.set_destination(g, t, desired);
            }
        }
        if changes.is_empty() {
            continue;
        }
        return Some((
            Footprint {
                dest_changes: changes.iter().map(|&(g, tt, _)| (g, tt)).collect(),
                ..Default::default()
            },
            UndoToken::Destinations(changes),
        ));
    }
    None
}
