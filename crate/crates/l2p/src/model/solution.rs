//! Schedule representation: extraction periods, destination policy and
//! processing-stream proportions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BlockId, GroupId, LocationId, LocationKind, MiningComplexInstance};

/// Sentinel for a block that is never extracted.
pub const NOT_MINED: u32 = 0;

/// A candidate schedule. Periods are 1-based; `0` means not mined, which
/// encodes the at-most-once reserve rule directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    periods: Vec<u32>,
    /// Destination per `(group, period)`, row-major `[g][t - 1]`.
    destinations: Vec<LocationId>,
    /// Stream proportion per `(arc, period, scenario)`, row-major.
    streams: Vec<f64>,
    horizon: usize,
    num_scenarios: usize,
}

impl Solution {
    pub fn empty(inst: &MiningComplexInstance) -> Self {
        let t = inst.horizon;
        let s = inst.num_scenarios();
        Self {
            periods: vec![NOT_MINED; inst.num_blocks()],
            destinations: inst
                .groups
                .iter()
                .flat_map(|g| std::iter::repeat(g.destinations[0]).take(t))
                .collect(),
            streams: vec![0.0; inst.flow_arcs.len() * t * s],
            horizon: t,
            num_scenarios: s,
        }
    }

    /// Extraction period of a block, if any.
    #[inline]
    pub fn period(&self, b: BlockId) -> Option<u32> {
        match self.periods[b as usize] {
            NOT_MINED => None,
            t => Some(t),
        }
    }

    #[inline]
    pub fn raw_period(&self, b: BlockId) -> u32 {
        self.periods[b as usize]
    }

    #[inline]
    pub fn set_period(&mut self, b: BlockId, t: u32) {
        self.periods[b as usize] = t;
    }

    #[inline]
    pub fn destination(&self, g: GroupId, t: u32) -> LocationId {
        self.destinations[g as usize * self.horizon + (t as usize - 1)]
    }

    #[inline]
    pub fn set_destination(&mut self, g: GroupId, t: u32, dest: LocationId) {
        self.destinations[g as usize * self.horizon + (t as usize - 1)] = dest;
    }

    #[inline]
    pub fn stream(&self, arc: usize, t: u32, s: usize) -> f64 {
        self.streams[(arc * self.horizon + (t as usize - 1)) * self.num_scenarios + s]
    }

    #[inline]
    pub fn set_stream(&mut self, arc: usize, t: u32, s: usize, y: f64) {
        self.streams[(arc * self.horizon + (t as usize - 1)) * self.num_scenarios + s] = y;
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_scenarios(&self) -> usize {
        self.num_scenarios
    }

    pub fn periods_raw(&self) -> &[u32] {
        &self.periods
    }

    pub fn destinations_raw(&self) -> &[LocationId] {
        &self.destinations
    }

    pub fn streams_raw(&self) -> &[f64] {
        &self.streams
    }

    pub fn mined_count(&self) -> usize {
        self.periods.iter().filter(|&&t| t != NOT_MINED).count()
    }
}

/// Builds a feasible starting schedule: a topological pass assigns each block
/// a uniform random period no earlier than its predecessors, skipping periods
/// whose mine capacity is already saturated; destinations are uniform over
/// each group's allowed set; streams are uniform over outgoing arcs, scaled
/// to reserve half of a stockpile's content.
pub fn build_initial_solution(inst: &MiningComplexInstance, seed: u64) -> Solution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sol = Solution::empty(inst);
    let t_max = inst.horizon as u32;

    // Remaining tonnage per (mine, period) under the soft mining bound.
    let cap = mining_capacity(inst);
    let mut used = vec![vec![0.0f64; inst.horizon + 1]; inst.locations.len()];

    let mut candidates: Vec<u32> = Vec::with_capacity(inst.horizon);
    for &b in &inst.topo_order {
        let block = &inst.blocks[b as usize];
        let mut earliest = 1u32;
        let mut blocked = false;
        for &p in &block.preds {
            match sol.period(p) {
                None => {
                    blocked = true;
                    break;
                }
                Some(tp) => earliest = earliest.max(tp),
            }
        }
        if blocked {
            continue;
        }
        candidates.clear();
        let mine = block.mine as usize;
        for t in earliest..=t_max {
            if used[mine][t as usize] + block.tonnage <= cap[mine][t as usize] {
                candidates.push(t);
            }
        }
        if candidates.is_empty() {
            continue; // capacity saturated on every admissible period
        }
        let t = candidates[rng.gen_range(0..candidates.len())];
        sol.set_period(b, t);
        used[mine][t as usize] += block.tonnage;
    }

    for g in &inst.groups {
        for t in 1..=t_max {
            let d = g.destinations[rng.gen_range(0..g.destinations.len())];
            sol.set_destination(g.id, t, d);
        }
    }

    for loc in &inst.locations {
        let n_out = loc.outgoing.len();
        if n_out == 0 {
            continue;
        }
        let share = match loc.kind {
            LocationKind::Stockpile => 0.5 / n_out as f64,
            _ => 1.0 / n_out as f64,
        };
        for &arc in &loc.outgoing {
            for t in 1..=t_max {
                for s in 0..inst.num_scenarios() {
                    sol.set_stream(arc, t, s, share);
                }
            }
        }
    }

    sol
}

/// Per-(mine, period) tonnage capacity taken from the upper bound of the
/// mine's tonnage attribute; unbounded mines get infinite capacity.
pub fn mining_capacity(inst: &MiningComplexInstance) -> Vec<Vec<f64>> {
    let mut cap = vec![vec![f64::INFINITY; inst.horizon + 1]; inst.locations.len()];
    for a in &inst.attrs {
        let loc = &inst.locations[a.location as usize];
        if loc.kind != LocationKind::Mine {
            continue;
        }
        if let super::AttrForm::Linear { coeffs, constant } = &a.form {
            // A plain tonnage meter: v = 1.0 * tonnage.
            let is_tonnage =
                *constant == 0.0 && coeffs.len() == 1 && coeffs[0] == (0, 1.0);
            if is_tonnage {
                for t in 1..=inst.horizon {
                    cap[loc.id as usize][t] = cap[loc.id as usize][t].min(a.upper[t - 1]);
                }
            }
        }
    }
    cap
}
