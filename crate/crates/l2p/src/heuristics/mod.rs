//! Low-level perturbation heuristics over four neighborhoods: extraction
//! sequence, cluster destinations, cut-off style destination policy and
//! processing streams. Every heuristic mutates a solution in place,
//! preserves feasibility by repairing what it breaks, and reports a
//! footprint plus an undo token that restores the solution bit-exactly.

mod destination;
mod extraction;
mod streams;

pub use extraction::{shift_block, toggle_block, ConeScope};
pub use streams::draw_stream_value;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::evaluator::{Footprint, MinedIndex};
use crate::model::{BlockId, GroupId, LocationId, MiningComplexInstance, Solution};

/// Period-shift rule of an extraction heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftMode {
    Advance1,
    Delay1,
    UniformRandom,
    /// Flip between mined and not mined.
    Toggle,
    /// Shift by two periods in a random direction.
    Jump2,
}

/// How a sampled block is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockChoice {
    Uniform,
    /// Prefer blocks scheduled in the period currently paying the largest
    /// deviation penalties.
    DeviationBiased,
}

/// How a `(group, period)` pair is chosen for destination switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionBias {
    Uniform,
    GradeBiased,
    PeriodBiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FamilyParams {
    Extraction { mode: ShiftMode, scope: ConeScope, choice: BlockChoice },
    ClusterDestination { bias: SelectionBias, batch: usize },
    DestinationPolicy { shift: i32, processor_rank: usize },
    ProcessingStream { sigma: f64, all_scenarios: bool },
}

impl FamilyParams {
    pub fn family_name(&self) -> &'static str {
        match self {
            FamilyParams::Extraction { .. } => "extraction-sequence",
            FamilyParams::ClusterDestination { .. } => "cluster-destination",
            FamilyParams::DestinationPolicy { .. } => "destination-policy",
            FamilyParams::ProcessingStream { .. } => "processing-stream",
        }
    }
}

/// One registered heuristic; ids are dense and stable for a registry config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicDescriptor {
    pub id: u16,
    pub params: FamilyParams,
}

/// Number of heuristics drawn from each family. Counts beyond a family's
/// parameter grid cycle through it; a family whose structural prerequisites
/// are missing from the instance is skipped entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistryConfig {
    pub extraction: usize,
    pub cluster_destination: usize,
    pub destination_policy: usize,
    pub processing_stream: usize,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        Self { extraction: 20, cluster_destination: 6, destination_policy: 6, processing_stream: 6 }
    }
}

/// Applying then undoing restores the solution bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum UndoToken {
    Blocks(Vec<(BlockId, u32)>),
    Destinations(Vec<(GroupId, u32, LocationId)>),
    Streams(Vec<(usize, u32, usize, f64)>),
}

impl UndoToken {
    pub fn undo(&self, sol: &mut Solution) {
        match self {
            UndoToken::Blocks(moves) => {
                for &(b, old) in moves {
                    sol.set_period(b, old);
                }
            }
            UndoToken::Destinations(moves) => {
                for &(g, t, old) in moves {
                    sol.set_destination(g, t, old);
                }
            }
            UndoToken::Streams(moves) => {
                for &(arc, t, s, old) in moves {
                    sol.set_stream(arc, t, s, old);
                }
            }
        }
    }
}

/// What one application produced; `changed` is `None` for a null outcome.
#[derive(Debug, Clone)]
pub struct PerturbationOutcome {
    pub heuristic: u16,
    pub delta_f: f64,
    /// Seconds consumed by apply plus delta evaluation (wall-clock or the
    /// deterministic work model, per the search configuration).
    pub time_s: f64,
    pub changed: Option<(Footprint, UndoToken)>,
}

/// Read-only context a heuristic may consult while sampling.
pub struct MoveCtx<'a> {
    pub inst: &'a MiningComplexInstance,
    pub mined: &'a MinedIndex,
    /// Mean deviation penalty charged per period, when an evaluator is
    /// attached; biased heuristics fall back to uniform sampling without it.
    pub penalty_by_period: Option<&'a [f64]>,
}

impl<'a> MoveCtx<'a> {
    /// Period with the largest current penalty, ties toward the earliest.
    pub fn worst_period(&self) -> Option<u32> {
        let pen = self.penalty_by_period?;
        let mut best = 0usize;
        let mut any = false;
        for (i, &p) in pen.iter().enumerate() {
            if p > 0.0 && (!any || p > pen[best]) {
                best = i;
                any = true;
            }
        }
        any.then_some(best as u32 + 1)
    }
}

/// Cumulative-scan weighted choice; `None` when the total mass is zero.
pub(crate) fn weighted_choice<R: Rng>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut x = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        x -= w;
        if x < 0.0 {
            return Some(i);
        }
    }
    Some(weights.len() - 1)
}

/// Builds the heuristic list for an instance. Families whose structures are
/// absent (no multi-destination group, no multi-arc node, no processor) are
/// left out; with the default config and all four structures present the
/// registry holds 38 heuristics.
pub fn build_registry(
    inst: &MiningComplexInstance,
    config: &RegistryConfig,
) -> Vec<HeuristicDescriptor> {
    let mut grid: Vec<FamilyParams> = Vec::new();

    let extraction_grid: Vec<FamilyParams> = {
        let mut v = Vec::new();
        for mode in [
            ShiftMode::Advance1,
            ShiftMode::Delay1,
            ShiftMode::UniformRandom,
            ShiftMode::Toggle,
            ShiftMode::Jump2,
        ] {
            for scope in [ConeScope::Violated, ConeScope::SamePeriod] {
                for choice in [BlockChoice::Uniform, BlockChoice::DeviationBiased] {
                    v.push(FamilyParams::Extraction { mode, scope, choice });
                }
            }
        }
        v
    };
    push_family(&mut grid, &extraction_grid, config.extraction);

    let has_multi_dest = inst.groups.iter().any(|g| g.destinations.len() >= 2);
    if has_multi_dest {
        let mut v = Vec::new();
        for bias in [SelectionBias::Uniform, SelectionBias::GradeBiased, SelectionBias::PeriodBiased]
        {
            for batch in [1usize, 5] {
                v.push(FamilyParams::ClusterDestination { bias, batch });
            }
        }
        push_family(&mut grid, &v, config.cluster_destination);
    }

    let has_proc = inst
        .locations
        .iter()
        .any(|l| l.kind == crate::model::LocationKind::Processor);
    let has_waste = inst
        .locations
        .iter()
        .any(|l| l.kind == crate::model::LocationKind::WasteDump);
    if has_proc && has_waste && !inst.groups.is_empty() {
        let mut v = Vec::new();
        for rank in 0..3usize {
            for shift in [1i32, -1] {
                v.push(FamilyParams::DestinationPolicy { shift, processor_rank: rank });
            }
        }
        push_family(&mut grid, &v, config.destination_policy);
    }

    let has_multi_arc = inst.locations.iter().any(|l| l.outgoing.len() >= 2);
    if has_multi_arc {
        let mut v = Vec::new();
        for sigma in [0.05, 0.1, 0.2] {
            for all in [false, true] {
                v.push(FamilyParams::ProcessingStream { sigma, all_scenarios: all });
            }
        }
        push_family(&mut grid, &v, config.processing_stream);
    }

    let families: std::collections::BTreeSet<&str> =
        grid.iter().map(|p| p.family_name()).collect();
    if families.len() < 2 {
        log::warn!(
            "instance structure admits only {} heuristic family(ies): {:?}",
            families.len(),
            families
        );
    }

    grid.into_iter()
        .enumerate()
        .map(|(i, params)| HeuristicDescriptor { id: i as u16, params })
        .collect()
}

fn push_family(out: &mut Vec<FamilyParams>, grid: &[FamilyParams], count: usize) {
    for i in 0..count {
        out.push(grid[i % grid.len()]);
    }
}

/// Runs one heuristic against the solution. `None` is the null outcome: no
/// admissible move was found after bounded retries and nothing was touched.
pub fn apply_heuristic<R: Rng>(
    desc: &HeuristicDescriptor,
    ctx: &MoveCtx<'_>,
    sol: &mut Solution,
    rng: &mut R,
) -> Option<(Footprint, UndoToken)> {
    match desc.params {
        FamilyParams::Extraction { mode, scope, choice } => {
            extraction::perturb_extraction(ctx, sol, mode, scope, choice, rng)
        }
        FamilyParams::ClusterDestination { bias, batch } => {
            destination::perturb_cluster_destination(ctx, sol, bias, batch, rng)
        }
        FamilyParams::DestinationPolicy { shift, processor_rank } => {
            destination::perturb_destination_policy(ctx, sol, shift, processor_rank, rng)
        }
        FamilyParams::ProcessingStream { sigma, all_scenarios } => {
            streams::perturb_processing_stream(ctx, sol, sigma, all_scenarios, rng)
        }
    }
}

#[cfg(test)]
mod tests;
