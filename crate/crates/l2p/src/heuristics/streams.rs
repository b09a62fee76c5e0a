//! Processing-stream perturbations: redraw one proportion from a normal
//! distribution centered on its current value, clamp into `[0, 1]`, and
//! rescale the sibling arcs so the node's simplex rule still holds.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::evaluator::{Footprint, StreamChange};
use crate::model::{LocationKind, LocationNode, Solution};

use super::{MoveCtx, UndoToken};

/// Pre-clamp proposal for a stream variable: one draw from `N(mean, sigma)`.
pub fn draw_stream_value<R: Rng>(rng: &mut R, mean: f64, sigma: f64) -> f64 {
    Normal::new(mean, sigma).expect("sigma must be finite and non-negative").sample(rng)
}

pub(super) fn redraw_at<R: Rng>(
    loc: &LocationNode,
    sol: &mut Solution,
    arc: usize,
    t: u32,
    s: usize,
    sigma: f64,
    rng: &mut R,
    undo: &mut Vec<(usize, u32, usize, f64)>,
) {
    for &a in &loc.outgoing {
        undo.push((a, t, s, sol.stream(a, t, s)));
    }
    let drawn = draw_stream_value(rng, sol.stream(arc, t, s), sigma).clamp(0.0, 1.0);
    sol.set_stream(arc, t, s, drawn);
    let sibling_sum: f64 = loc
        .outgoing
        .iter()
        .filter(|&&a| a != arc)
        .map(|&a| sol.stream(a, t, s))
        .sum();
    let needs_rescale = match loc.kind {
        // Stockpiles may retain material; the carry-over absorbs slack.
        LocationKind::Stockpile => drawn + sibling_sum > 1.0,
        _ => true,
    };
    if !needs_rescale {
        return;
    }
    let target = 1.0 - drawn;
    let n_sib = loc.outgoing.len() - 1;
    for &a in &loc.outgoing {
        if a == arc {
            continue;
        }
        let y = if sibling_sum > 0.0 {
            sol.stream(a, t, s) * (target / sibling_sum)
        } else {
            target / n_sib as f64
        };
        sol.set_stream(a, t, s, y);
    }
}

pub(super) fn perturb_processing_stream<R: Rng>(
    ctx: &MoveCtx<'_>,
    sol: &mut Solution,
    sigma: f64,
    all_scenarios: bool,
    rng: &mut R,
) -> Option<(Footprint, UndoToken)> {
    let inst = ctx.inst;
    let nodes: Vec<&LocationNode> =
        inst.locations.iter().filter(|l| l.outgoing.len() >= 2).collect();
    if nodes.is_empty() {
        return None;
    }
    let loc = nodes[rng.gen_range(0..nodes.len())];
    let arc = loc.outgoing[rng.gen_range(0..loc.outgoing.len())];
    let t = rng.gen_range(1..=inst.horizon as u32);
    let mut undo = Vec::new();
    let scenario = if all_scenarios {
        for s in 0..inst.num_scenarios() {
            redraw_at(loc, sol, arc, t, s, sigma, rng, &mut undo);
        }
        None
    } else {
        let s = rng.gen_range(0..inst.num_scenarios());
        redraw_at(loc, sol, arc, t, s, sigma, rng, &mut undo);
        Some(s)
    };
    let stream_changes = loc
        .outgoing
        .iter()
        .map(|&a| StreamChange { arc: a, period: t, scenario })
        .collect();
    Some((
        Footprint { stream_changes, ..Default::default() },
        UndoToken::Streams(undo),
    ))
}
