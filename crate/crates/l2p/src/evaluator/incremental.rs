//! Footprint-based incremental re-evaluation.
//!
//! The evaluator caches every intermediate tensor of the forward pass. A
//! perturbation reports the indices it touched; re-evaluation recomputes the
//! per-period extraction sums for the affected periods and replays the flow
//! pass from the earliest affected period forward, for the affected
//! scenarios only. Each cell is recomputed from scratch in the same order as
//! a full evaluation, so the refreshed state is bit-identical to one built
//! from the new solution, and the returned delta equals a full re-evaluation
//! difference exactly.

use crate::model::{
    AttrForm, BlockId, GroupId, LocationKind, MiningComplexInstance, Solution, NOT_MINED,
};

use super::{attr_value, AttributeState, EvaluationReport};

/// A single touched stream variable; `scenario: None` means every scenario
/// of the arc-period pair changed.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamChange {
    pub arc: usize,
    pub period: u32,
    pub scenario: Option<usize>,
}

/// Indices touched by a perturbation, with enough information to update the
/// extraction index (old and new periods per moved block).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Footprint {
    /// `(block, old raw period, new raw period)`; raw `0` means not mined.
    pub block_moves: Vec<(BlockId, u32, u32)>,
    /// `(group, period)` pairs whose destination changed.
    pub dest_changes: Vec<(GroupId, u32)>,
    pub stream_changes: Vec<StreamChange>,
}

impl Footprint {
    pub fn is_empty(&self) -> bool {
        self.block_moves.is_empty()
            && self.dest_changes.is_empty()
            && self.stream_changes.is_empty()
    }

    /// Deterministic proxy for the work a move causes; used by the virtual
    /// timing mode of the search.
    pub fn work_units(&self, num_scenarios: usize) -> u64 {
        let streams: usize = self
            .stream_changes
            .iter()
            .map(|c| if c.scenario.is_some() { 1 } else { num_scenarios })
            .sum();
        (self.block_moves.len() + self.dest_changes.len() + streams) as u64
    }

    fn reversed(&self) -> Footprint {
        Footprint {
            block_moves: self.block_moves.iter().map(|&(b, o, n)| (b, n, o)).collect(),
            dest_changes: self.dest_changes.clone(),
            stream_changes: self.stream_changes.clone(),
        }
    }
}

/// Blocks extracted in each period, ascending by id. Slot 0 is unused.
#[derive(Debug, Clone)]
pub struct MinedIndex {
    per_period: Vec<Vec<BlockId>>,
}

impl MinedIndex {
    pub fn build(inst: &MiningComplexInstance, sol: &Solution) -> Self {
        let mut per_period = vec![Vec::new(); inst.horizon + 1];
        for b in 0..inst.num_blocks() as BlockId {
            let t = sol.raw_period(b);
            if t != NOT_MINED {
                per_period[t as usize].push(b);
            }
        }
        Self { per_period }
    }

    #[inline]
    pub fn blocks_at(&self, t: u32) -> &[BlockId] {
        &self.per_period[t as usize]
    }

    pub fn mined_count(&self) -> usize {
        self.per_period.iter().map(|v| v.len()).sum()
    }

    /// Applies `(block, old, new)` period moves, keeping lists sorted.
    pub fn apply_moves(&mut self, moves: &[(BlockId, u32, u32)]) {
        for &(b, old, new) in moves {
            if old == new {
                continue;
            }
            if old != NOT_MINED {
                let list = &mut self.per_period[old as usize];
                if let Ok(pos) = list.binary_search(&b) {
                    list.remove(pos);
                }
            }
            if new != NOT_MINED {
                let list = &mut self.per_period[new as usize];
                if let Err(pos) = list.binary_search(&b) {
                    list.insert(pos, b);
                }
            }
        }
    }
}

/// Which scenarios a re-evaluation must replay.
enum Scope {
    All,
    Subset(Vec<usize>),
}

impl Scope {
    fn of(fp: &Footprint) -> Scope {
        if !fp.block_moves.is_empty()
            || !fp.dest_changes.is_empty()
            || fp.stream_changes.iter().any(|c| c.scenario.is_none())
        {
            return Scope::All;
        }
        let mut subset: Vec<usize> =
            fp.stream_changes.iter().filter_map(|c| c.scenario).collect();
        subset.sort_unstable();
        subset.dedup();
        Scope::Subset(subset)
    }
}

/// Cached evaluation state for one solution, refreshed in place through
/// [`IncrementalEvaluator::apply`] / [`IncrementalEvaluator::revert`].
pub struct IncrementalEvaluator<'a> {
    inst: &'a MiningComplexInstance,
    mined: MinedIndex,
    np: usize,
    ni: usize,
    nt: usize,
    ns: usize,
    /// `[p][location][t][s]`; mine rows hold extraction sums.
    v_p: Vec<f64>,
    /// `[p][group][t][s]`: extraction routed through each group before the
    /// destination choice is applied.
    group_sum: Vec<f64>,
    /// `[attr][t][s]`
    v_h: Vec<f64>,
    d_plus: Vec<f64>,
    d_minus: Vec<f64>,
    /// `[s][t][location]` money terms.
    contrib_rev: Vec<f64>,
    contrib_pen: Vec<f64>,
    per_scenario: Vec<f64>,
    objective: f64,
    revenue: f64,
    penalty: f64,
    /// Mean over scenarios of the total penalty charged in each period
    /// (index `t - 1`); drives deviation-biased heuristics.
    penalty_by_period: Vec<f64>,
}

impl<'a> IncrementalEvaluator<'a> {
    pub fn new(inst: &'a MiningComplexInstance, sol: &Solution) -> Self {
        Self::new_scoped(inst, sol, None)
    }

    /// Builds the cache, restricted to one scenario when `only` is set (used
    /// by the public single-scenario pass).
    pub(super) fn new_scoped(
        inst: &'a MiningComplexInstance,
        sol: &Solution,
        only: Option<usize>,
    ) -> Self {
        let (np, ni, nt, ns) =
            (inst.num_primary(), inst.locations.len(), inst.horizon, inst.num_scenarios());
        let mut ev = Self {
            inst,
            mined: MinedIndex::build(inst, sol),
            np,
            ni,
            nt,
            ns,
            v_p: vec![0.0; np * ni * nt * ns],
            group_sum: vec![0.0; np * inst.groups.len() * nt * ns],
            v_h: vec![0.0; inst.attrs.len() * nt * ns],
            d_plus: vec![0.0; inst.attrs.len() * nt * ns],
            d_minus: vec![0.0; inst.attrs.len() * nt * ns],
            contrib_rev: vec![0.0; ns * nt * ni],
            contrib_pen: vec![0.0; ns * nt * ni],
            per_scenario: vec![0.0; ns],
            objective: 0.0,
            revenue: 0.0,
            penalty: 0.0,
            penalty_by_period: vec![0.0; nt],
        };
        for t in 1..=nt as u32 {
            ev.rebuild_period_sums(t);
        }
        let scope = match only {
            None => Scope::All,
            Some(s) => Scope::Subset(vec![s]),
        };
        ev.propagate_range(sol, 1, &scope);
        ev.resum();
        ev
    }

    #[inline]
    fn pits(&self, p: usize, i: usize, t: u32, s: usize) -> usize {
        ((p * self.ni + i) * self.nt + (t as usize - 1)) * self.ns + s
    }

    #[inline]
    fn pgts(&self, p: usize, g: usize, t: u32, s: usize) -> usize {
        ((p * self.inst.groups.len() + g) * self.nt + (t as usize - 1)) * self.ns + s
    }

    #[inline]
    fn hts(&self, h: usize, t: u32, s: usize) -> usize {
        (h * self.nt + (t as usize - 1)) * self.ns + s
    }

    #[inline]
    fn stl(&self, s: usize, t: u32, l: usize) -> usize {
        (s * self.nt + (t as usize - 1)) * self.ni + l
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn mined(&self) -> &MinedIndex {
        &self.mined
    }

    pub fn penalty_by_period(&self) -> &[f64] {
        &self.penalty_by_period
    }

    /// Re-evaluates after the solution was mutated according to `fp` and
    /// returns the objective change.
    pub fn apply(&mut self, sol: &Solution, fp: &Footprint) -> f64 {
        if fp.is_empty() {
            return 0.0;
        }
        let before = self.objective;
        self.mined.apply_moves(&fp.block_moves);
        let mut t0 = u32::MAX;
        let mut rebuild: Vec<u32> = Vec::new();
        for &(_, old, new) in &fp.block_moves {
            for t in [old, new] {
                if t != NOT_MINED {
                    rebuild.push(t);
                    t0 = t0.min(t);
                }
            }
        }
        rebuild.sort_unstable();
        rebuild.dedup();
        for &t in &rebuild {
            self.rebuild_period_sums(t);
        }
        for &(_, t) in &fp.dest_changes {
            t0 = t0.min(t);
        }
        for c in &fp.stream_changes {
            t0 = t0.min(c.period);
        }
        if t0 == u32::MAX {
            return 0.0;
        }
        let scope = Scope::of(fp);
        self.propagate_range(sol, t0, &scope);
        self.resum();
        self.objective - before
    }

    /// Restores the cache after the caller undid the mutation on `sol` and
    /// returns the objective change (the exact negation of the apply delta).
    /// Recomputing the same cells from the restored inputs reproduces the
    /// previous state exactly.
    pub fn revert(&mut self, sol: &Solution, fp: &Footprint) -> f64 {
        let rev = fp.reversed();
        self.apply(sol, &rev)
    }

    /// Extraction sums per mine and per group for one period, accumulated in
    /// ascending block order.
    fn rebuild_period_sums(&mut self, t: u32) {
        let inst = self.inst;
        let ns = self.ns;
        for p in 0..self.np {
            for &m in &inst.mines {
                let base = self.pits(p, m as usize, t, 0);
                self.v_p[base..base + ns].fill(0.0);
            }
            for g in 0..inst.groups.len() {
                let base = self.pgts(p, g, t, 0);
                self.group_sum[base..base + ns].fill(0.0);
            }
        }
        // Single sweep over the blocks extracted in t.
        let blocks = std::mem::take(&mut self.mined.per_period[t as usize]);
        for &b in &blocks {
            let mine = inst.blocks[b as usize].mine as usize;
            for p in 0..self.np {
                for s in 0..ns {
                    let beta = inst.scenarios.beta(p, b, s);
                    let vi = self.pits(p, mine, t, s);
                    self.v_p[vi] += beta;
                    let g = inst.group_of(b, s) as usize;
                    let gi = self.pgts(p, g, t, s);
                    self.group_sum[gi] += beta;
                }
            }
        }
        self.mined.per_period[t as usize] = blocks;
    }

    /// Replays the flow pass for `t0..=T` over the scoped scenarios. Cells
    /// are recomputed from scratch; untouched inputs give untouched outputs.
    fn propagate_range(&mut self, sol: &Solution, t0: u32, scope: &Scope) {
        let inst = self.inst;
        for t in t0..=self.nt as u32 {
            match scope {
                Scope::All => {
                    for s in 0..self.ns {
                        self.recompute_cell(sol, t, s);
                    }
                }
                Scope::Subset(list) => {
                    for &s in list {
                        self.recompute_cell(sol, t, s);
                    }
                }
            }
        }
        let _ = inst;
    }

    fn recompute_cell(&mut self, sol: &Solution, t: u32, s: usize) {
        let inst = self.inst;
        // Primary quantities at non-mine locations.
        for loc in &inst.locations {
            if loc.kind == LocationKind::Mine {
                continue;
            }
            let li = loc.id as usize;
            for p in 0..self.np {
                let mut v = 0.0;
                if t > 1 {
                    if loc.kind == LocationKind::Stockpile {
                        let mut y_sum = 0.0;
                        for &a in &loc.outgoing {
                            y_sum += sol.stream(a, t - 1, s);
                        }
                        v += self.v_p[self.pits(p, li, t - 1, s)] * (1.0 - y_sum).max(0.0);
                    }
                    for &a in &loc.incoming {
                        let from = inst.flow_arcs[a].0 as usize;
                        let r = super::recovery_of(
                            inst,
                            &self.v_h,
                            |h, tt, ss| self.hts(h, tt, ss),
                            from,
                            t - 1,
                            s,
                        );
                        v += r * self.v_p[self.pits(p, from, t - 1, s)] * sol.stream(a, t - 1, s);
                    }
                }
                for &g in &loc.incoming_groups {
                    if sol.destination(g, t) == loc.id {
                        v += self.group_sum[self.pgts(p, g as usize, t, s)];
                    }
                }
                let vi = self.pits(p, li, t, s);
                self.v_p[vi] = v;
            }
        }
        // Hereditary attributes, deviations and money terms per location.
        for loc in &inst.locations {
            let li = loc.id as usize;
            let mut rev = 0.0;
            let mut pen = 0.0;
            for &h in &loc.attrs {
                let attr = &inst.attrs[h as usize];
                let outgoing_share = match attr.form {
                    AttrForm::StockCarry { .. } => {
                        let mut y_sum = 0.0;
                        for &a in &loc.outgoing {
                            y_sum += sol.stream(a, t, s);
                        }
                        (1.0 - y_sum).max(0.0)
                    }
                    _ => 0.0,
                };
                let v = attr_value(
                    &attr.form,
                    |p| self.v_p[self.pits(p, li, t, s)],
                    outgoing_share,
                );
                let ti = t as usize - 1;
                let dp = (v - attr.upper[ti]).max(0.0);
                let dm = (attr.lower[ti] - v).max(0.0);
                let hi = self.hts(h as usize, t, s);
                self.v_h[hi] = v;
                self.d_plus[hi] = dp;
                self.d_minus[hi] = dm;
                rev += attr.price[ti] * v;
                pen += attr.penalty_plus[ti] * dp + attr.penalty_minus[ti] * dm;
            }
            let ci = self.stl(s, t, li);
            self.contrib_rev[ci] = rev;
            self.contrib_pen[ci] = pen;
        }
    }

    /// Deterministic ordered reduction of the money terms.
    fn resum(&mut self) {
        let inv = 1.0 / self.ns as f64;
        let mut obj = 0.0;
        let mut revenue = 0.0;
        let mut penalty = 0.0;
        self.penalty_by_period.fill(0.0);
        for s in 0..self.ns {
            let mut obj_s = 0.0;
            let mut rev_s = 0.0;
            let mut pen_s = 0.0;
            for t in 1..=self.nt as u32 {
                let base = self.stl(s, t, 0);
                let mut pen_t = 0.0;
                for l in 0..self.ni {
                    let r = self.contrib_rev[base + l];
                    let p = self.contrib_pen[base + l];
                    obj_s += r - p;
                    rev_s += r;
                    pen_t += p;
                }
                pen_s += pen_t;
                self.penalty_by_period[t as usize - 1] += pen_t * inv;
            }
            self.per_scenario[s] = obj_s;
            obj += obj_s;
            revenue += rev_s;
            penalty += pen_s;
        }
        self.objective = obj * inv;
        self.revenue = revenue * inv;
        self.penalty = penalty * inv;
    }

    pub fn report(&self, retain_state: bool) -> EvaluationReport {
        EvaluationReport {
            objective: self.objective,
            per_scenario: self.per_scenario.clone(),
            revenue: self.revenue,
            penalty: self.penalty,
            state: retain_state.then(|| {
                let ids: Vec<usize> = (0..self.ns).collect();
                self.state_for(&ids)
            }),
        }
    }

    /// Copies the cached tensors for the given scenarios into a standalone
    /// state snapshot.
    pub(super) fn state_for(&self, scenario_ids: &[usize]) -> AttributeState {
        let sn = scenario_ids.len();
        let mut st = AttributeState {
            scenario_ids: scenario_ids.to_vec(),
            num_locations: self.ni,
            num_primary: self.np,
            num_attrs: self.inst.attrs.len(),
            horizon: self.nt,
            v_p: vec![0.0; self.np * self.ni * self.nt * sn],
            v_h: vec![0.0; self.inst.attrs.len() * self.nt * sn],
            r: vec![0.0; self.np * self.ni * self.nt * sn],
            d_plus: vec![0.0; self.inst.attrs.len() * self.nt * sn],
            d_minus: vec![0.0; self.inst.attrs.len() * self.nt * sn],
        };
        for (si, &s) in scenario_ids.iter().enumerate() {
            for t in 1..=self.nt as u32 {
                for i in 0..self.ni {
                    let r = super::recovery_of(
                        self.inst,
                        &self.v_h,
                        |h, tt, ss| self.hts(h, tt, ss),
                        i,
                        t,
                        s,
                    );
                    for p in 0..self.np {
                        let di = st.idx_pits(p, i, t, si);
                        st.v_p[di] = self.v_p[self.pits(p, i, t, s)];
                        st.r[di] = r;
                    }
                }
                for h in 0..self.inst.attrs.len() {
                    let di = st.idx_hts(h, t, si);
                    let hi = self.hts(h, t, s);
                    st.v_h[di] = self.v_h[hi];
                    st.d_plus[di] = self.d_plus[hi];
                    st.d_minus[di] = self.d_minus[hi];
                }
            }
        }
        st
    }
}
