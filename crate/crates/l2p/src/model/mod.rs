//! Mining-complex data model: blocks, scenarios, locations, groups and the
//! decision variables of a schedule.
//!
//! An instance is immutable once built. All derived lookup tables (successor
//! sets, topological block order, per-scenario group member lists, grade
//! ranks) are computed by [`MiningComplexInstance::new`] so the hot paths in
//! the evaluator and heuristics never search.

mod feasibility;
mod generator;
mod io;
mod kmeans;
mod solution;

pub use feasibility::{check_feasibility, Violation, ViolationReport};
pub use generator::{generate_synthetic_instance, GeneratorConfig, GradeFieldConfig};
pub use io::{read_instance, write_instance};
pub use kmeans::{cluster_blocks, kmeans, KMeansResult};
pub use solution::{build_initial_solution, Solution, NOT_MINED};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type BlockId = u32;
pub type LocationId = u32;
pub type GroupId = u32;
pub type AttrId = u32;
/// Index into [`MiningComplexInstance::primary_names`].
pub type PrimaryId = usize;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("malformed solution: {0}")]
    MalformedSolution(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A single orebody block. Predecessors must be extracted no later than the
/// block itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: BlockId,
    pub mine: LocationId,
    /// Lattice position `(i, j, k)`; `k` grows downward, `k = 0` is surface.
    pub pos: [i64; 3],
    /// Mass in tonnes, strictly positive.
    pub tonnage: f64,
    pub preds: Vec<BlockId>,
}

/// Simulated block attributes over equiprobable scenarios, indexed
/// `(primary attribute, block, scenario)` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    count: usize,
    num_blocks: usize,
    num_primary: usize,
    beta: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(
        num_primary: usize,
        num_blocks: usize,
        count: usize,
        beta: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if count == 0 {
            return Err(ModelError::InvalidConfig("scenario count is zero".into()));
        }
        if beta.len() != num_primary * num_blocks * count {
            return Err(ModelError::InvalidInstance(format!(
                "beta has {} entries, expected {}",
                beta.len(),
                num_primary * num_blocks * count
            )));
        }
        Ok(Self { count, num_blocks, num_primary, beta })
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn num_primary(&self) -> usize {
        self.num_primary
    }

    /// Quantity of primary attribute `p` carried by block `b` in scenario `s`.
    #[inline]
    pub fn beta(&self, p: PrimaryId, b: BlockId, s: usize) -> f64 {
        self.beta[(p * self.num_blocks + b as usize) * self.count + s]
    }

    pub fn raw(&self) -> &[f64] {
        &self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    Mine,
    Stockpile,
    Processor,
    WasteDump,
}

/// How much of a primary attribute survives when forwarded downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recovery {
    Constant(f64),
    /// Recovery read from a hereditary attribute value, clamped to `[0, 1]`.
    Attribute(AttrId),
}

/// Value of a hereditary attribute as a function of the primary quantities at
/// its location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrForm {
    Linear { constant: f64, coeffs: Vec<(PrimaryId, f64)> },
    /// End-of-period retained quantity `v_p * (1 - sum of outgoing y)`;
    /// only meaningful on stockpiles.
    StockCarry { primary: PrimaryId },
}

/// A hereditary attribute at one location with its pricing, bounds and
/// deviation penalties. Per-period price and penalty arrays are discounted at
/// instance build time; index `t - 1` holds period `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HereditaryAttr {
    pub id: AttrId,
    pub name: String,
    pub location: LocationId,
    pub form: AttrForm,
    pub price_base: f64,
    pub price_discount: String,
    pub penalty_plus_base: f64,
    pub penalty_minus_base: f64,
    pub risk_discount: String,
    pub lower_base: Option<Vec<f64>>,
    pub upper_base: Option<Vec<f64>>,
    // Discounted per-period tables, filled by the instance constructor.
    pub price: Vec<f64>,
    pub penalty_plus: Vec<f64>,
    pub penalty_minus: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationNode {
    pub id: LocationId,
    pub name: String,
    pub kind: LocationKind,
    pub recovery: Recovery,
    pub attrs: Vec<AttrId>,
    // Derived adjacency on the flow-arc list.
    pub outgoing: Vec<usize>,
    pub incoming: Vec<usize>,
    pub incoming_groups: Vec<GroupId>,
}

/// A cluster of similar blocks forming one destination-policy decision per
/// period. Per-scenario membership lives in
/// [`MiningComplexInstance::memberships`].
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub id: GroupId,
    pub mine: LocationId,
    /// Allowed destinations, non-empty.
    pub destinations: Vec<LocationId>,
    /// Mean grade over all member `(block, scenario)` pairs; derived.
    pub mean_grade: f64,
}

/// Named time-discount rates (`d1` for cash flow, `d2`..`d6` for geological
/// risk discounting of penalties).
pub type Discounts = std::collections::BTreeMap<String, f64>;

/// A full, validated mining-complex instance.
#[derive(Debug, Clone)]
pub struct MiningComplexInstance {
    pub name: String,
    pub horizon: usize,
    /// Primary attribute names; index 0 is total tonnage by convention.
    pub primary_names: Vec<String>,
    pub blocks: Vec<Block>,
    pub scenarios: ScenarioSet,
    pub locations: Vec<LocationNode>,
    /// Flow arcs between non-mine locations, `(from, to)`.
    pub flow_arcs: Vec<(LocationId, LocationId)>,
    pub groups: Vec<Group>,
    /// Group membership per `(block, scenario)`, row-major `[b][s]`.
    pub memberships: Vec<GroupId>,
    pub attrs: Vec<HereditaryAttr>,
    pub discounts: Discounts,
    // Derived tables.
    pub succs: Vec<Vec<BlockId>>,
    pub topo_order: Vec<BlockId>,
    pub mines: Vec<LocationId>,
    pub blocks_of_mine: Vec<Vec<BlockId>>,
    /// Member blocks per group per scenario, ascending block id.
    pub group_members: Vec<Vec<Vec<BlockId>>>,
    /// Groups of each mine ordered by ascending mean grade.
    pub groups_by_grade: Vec<Vec<GroupId>>,
    /// Rank of each group in its mine's grade ordering.
    pub grade_rank: Vec<usize>,
}

impl MiningComplexInstance {
    /// Validates the raw parts, derives lookup tables and discount schedules.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        horizon: usize,
        primary_names: Vec<String>,
        blocks: Vec<Block>,
        scenarios: ScenarioSet,
        mut locations: Vec<LocationNode>,
        flow_arcs: Vec<(LocationId, LocationId)>,
        mut groups: Vec<Group>,
        memberships: Vec<GroupId>,
        mut attrs: Vec<HereditaryAttr>,
        discounts: Discounts,
    ) -> Result<Self, ModelError> {
        if horizon == 0 {
            return Err(ModelError::InvalidConfig("horizon is zero".into()));
        }
        if blocks.is_empty() {
            return Err(ModelError::InvalidConfig("instance has no blocks".into()));
        }
        if primary_names.is_empty() {
            return Err(ModelError::InvalidInstance("no primary attributes".into()));
        }
        let nb = blocks.len();
        let ns = scenarios.count();
        if scenarios.num_blocks != nb || scenarios.num_primary != primary_names.len() {
            return Err(ModelError::InvalidInstance("scenario set shape mismatch".into()));
        }
        if memberships.len() != nb * ns {
            return Err(ModelError::InvalidInstance("membership table shape mismatch".into()));
        }
        for (idx, b) in blocks.iter().enumerate() {
            if b.id as usize != idx {
                return Err(ModelError::InvalidInstance("block ids must be dense".into()));
            }
            if !(b.tonnage > 0.0) {
                return Err(ModelError::InvalidInstance(format!(
                    "block {} has non-positive tonnage",
                    b.id
                )));
            }
            let mine_ok = locations
                .get(b.mine as usize)
                .map(|l| l.kind == LocationKind::Mine)
                .unwrap_or(false);
            if !mine_ok {
                return Err(ModelError::InvalidInstance(format!(
                    "block {} references non-mine location {}",
                    b.id, b.mine
                )));
            }
            for &p in &b.preds {
                if p as usize >= nb {
                    return Err(ModelError::InvalidInstance(format!(
                        "block {} has out-of-range predecessor {p}",
                        b.id
                    )));
                }
            }
        }
        for v in scenarios.raw() {
            if !v.is_finite() || *v < 0.0 {
                return Err(ModelError::InvalidInstance(
                    "scenario attributes must be finite and non-negative".into(),
                ));
            }
        }
        for (idx, l) in locations.iter().enumerate() {
            if l.id as usize != idx {
                return Err(ModelError::InvalidInstance("location ids must be dense".into()));
            }
            if l.kind == LocationKind::Stockpile && l.recovery != Recovery::Constant(1.0) {
                return Err(ModelError::InvalidInstance(format!(
                    "stockpile {} must have constant recovery 1",
                    l.id
                )));
            }
        }
        for &(a, b) in &flow_arcs {
            for end in [a, b] {
                match locations.get(end as usize) {
                    None => {
                        return Err(ModelError::InvalidInstance(format!(
                            "flow arc endpoint {end} out of range"
                        )))
                    }
                    Some(l) if l.kind == LocationKind::Mine => {
                        return Err(ModelError::InvalidInstance(
                            "flow arcs may not touch mines; mines feed groups".into(),
                        ))
                    }
                    _ => {}
                }
            }
        }
        for (idx, g) in groups.iter().enumerate() {
            if g.id as usize != idx {
                return Err(ModelError::InvalidInstance("group ids must be dense".into()));
            }
            if g.destinations.is_empty() {
                return Err(ModelError::InvalidInstance(format!(
                    "group {} has no destinations",
                    g.id
                )));
            }
            for &d in &g.destinations {
                match locations.get(d as usize) {
                    None => {
                        return Err(ModelError::InvalidInstance(format!(
                            "group {} destination {d} out of range",
                            g.id
                        )))
                    }
                    Some(l) if l.kind == LocationKind::Mine => {
                        return Err(ModelError::InvalidInstance(
                            "group destinations must be processing locations".into(),
                        ))
                    }
                    _ => {}
                }
            }
        }
        for &g in &memberships {
            if g as usize >= groups.len() {
                return Err(ModelError::InvalidInstance("membership references unknown group".into()));
            }
        }
        for (idx, a) in attrs.iter().enumerate() {
            if a.id as usize != idx {
                return Err(ModelError::InvalidInstance("attribute ids must be dense".into()));
            }
            if a.location as usize >= locations.len() {
                return Err(ModelError::InvalidInstance(format!(
                    "attribute {} at unknown location",
                    a.id
                )));
            }
            match &a.form {
                AttrForm::Linear { coeffs, .. } => {
                    if coeffs.iter().any(|&(p, _)| p >= primary_names.len()) {
                        return Err(ModelError::InvalidInstance(format!(
                            "attribute {} references unknown primary attribute",
                            a.id
                        )));
                    }
                }
                AttrForm::StockCarry { primary } => {
                    if *primary >= primary_names.len() {
                        return Err(ModelError::InvalidInstance(format!(
                            "attribute {} references unknown primary attribute",
                            a.id
                        )));
                    }
                    if locations[a.location as usize].kind != LocationKind::Stockpile {
                        return Err(ModelError::InvalidInstance(format!(
                            "stock-carry attribute {} on a non-stockpile location",
                            a.id
                        )));
                    }
                }
            }
            for key in [&a.price_discount, &a.risk_discount] {
                if !discounts.contains_key(key) {
                    return Err(ModelError::InvalidInstance(format!(
                        "attribute {} references unknown discount rate {key}",
                        a.id
                    )));
                }
            }
            for bounds in [&a.lower_base, &a.upper_base] {
                if let Some(v) = bounds {
                    if v.len() != horizon {
                        return Err(ModelError::InvalidInstance(format!(
                            "attribute {} bound array does not cover the horizon",
                            a.id
                        )));
                    }
                }
            }
        }
        for l in &locations {
            if let Recovery::Attribute(h) = l.recovery {
                let ok = attrs.get(h as usize).map(|a| a.location == l.id).unwrap_or(false);
                if !ok {
                    return Err(ModelError::InvalidInstance(format!(
                        "location {} recovery attribute must live at the same location",
                        l.id
                    )));
                }
            }
        }

        let (topo_order, succs) = topo_sort_blocks(&blocks)?;
        check_flow_dag(locations.len(), &flow_arcs)?;

        // Adjacency on locations.
        for l in locations.iter_mut() {
            l.outgoing.clear();
            l.incoming.clear();
            l.incoming_groups.clear();
            l.attrs.clear();
        }
        for (ai, &(from, to)) in flow_arcs.iter().enumerate() {
            locations[from as usize].outgoing.push(ai);
            locations[to as usize].incoming.push(ai);
        }
        for g in &groups {
            for &d in &g.destinations {
                locations[d as usize].incoming_groups.push(g.id);
            }
        }
        for a in &attrs {
            locations[a.location as usize].attrs.push(a.id);
        }

        // Discounted price/penalty tables and bound arrays.
        for a in attrs.iter_mut() {
            let dp = discounts[&a.price_discount];
            let dr = discounts[&a.risk_discount];
            a.price = (1..=horizon).map(|t| a.price_base / (1.0 + dp).powi(t as i32)).collect();
            a.penalty_plus =
                (1..=horizon).map(|t| a.penalty_plus_base / (1.0 + dr).powi(t as i32)).collect();
            a.penalty_minus =
                (1..=horizon).map(|t| a.penalty_minus_base / (1.0 + dr).powi(t as i32)).collect();
            a.lower = a.lower_base.clone().unwrap_or_else(|| vec![f64::NEG_INFINITY; horizon]);
            a.upper = a.upper_base.clone().unwrap_or_else(|| vec![f64::INFINITY; horizon]);
        }

        // Per-mine block lists and per-scenario group members.
        let mines: Vec<LocationId> = locations
            .iter()
            .filter(|l| l.kind == LocationKind::Mine)
            .map(|l| l.id)
            .collect();
        if mines.is_empty() {
            return Err(ModelError::InvalidInstance("instance has no mines".into()));
        }
        let mut blocks_of_mine = vec![Vec::new(); locations.len()];
        for b in &blocks {
            blocks_of_mine[b.mine as usize].push(b.id);
        }
        let mut group_members = vec![vec![Vec::new(); ns]; groups.len()];
        for b in 0..nb {
            for s in 0..ns {
                let g = memberships[b * ns + s];
                group_members[g as usize][s].push(b as BlockId);
            }
        }

        // Mean grade per group (total metal over total tonnage of members),
        // used to order groups for cut-off style heuristics.
        let grade = |b: BlockId, s: usize| -> f64 {
            let tons = scenarios.beta(0, b, s);
            if tons <= 0.0 {
                return 0.0;
            }
            let metal: f64 =
                (1..primary_names.len()).map(|p| scenarios.beta(p, b, s)).sum();
            metal / tons
        };
        for g in groups.iter_mut() {
            let mut sum = 0.0;
            let mut cnt = 0usize;
            for (s, members) in group_members[g.id as usize].iter().enumerate() {
                for &b in members {
                    sum += grade(b, s);
                    cnt += 1;
                }
            }
            g.mean_grade = if cnt == 0 { 0.0 } else { sum / cnt as f64 };
        }
        let mut groups_by_grade = vec![Vec::new(); locations.len()];
        for g in &groups {
            groups_by_grade[g.mine as usize].push(g.id);
        }
        for list in groups_by_grade.iter_mut() {
            list.sort_by(|&a, &b| {
                groups[a as usize]
                    .mean_grade
                    .partial_cmp(&groups[b as usize].mean_grade)
                    .unwrap()
                    .then(a.cmp(&b))
            });
        }
        let mut grade_rank = vec![0usize; groups.len()];
        for list in &groups_by_grade {
            for (rank, &g) in list.iter().enumerate() {
                grade_rank[g as usize] = rank;
            }
        }

        Ok(Self {
            name,
            horizon,
            primary_names,
            blocks,
            scenarios,
            locations,
            flow_arcs,
            groups,
            memberships,
            attrs,
            discounts,
            succs,
            topo_order,
            mines,
            blocks_of_mine,
            group_members,
            groups_by_grade,
            grade_rank,
        })
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    #[inline]
    pub fn num_scenarios(&self) -> usize {
        self.scenarios.count()
    }

    #[inline]
    pub fn num_primary(&self) -> usize {
        self.primary_names.len()
    }

    /// Group of block `b` in scenario `s`.
    #[inline]
    pub fn group_of(&self, b: BlockId, s: usize) -> GroupId {
        self.memberships[b as usize * self.num_scenarios() + s]
    }

    /// Grade of a block in one scenario: metal mass over total mass.
    pub fn block_grade(&self, b: BlockId, s: usize) -> f64 {
        let tons = self.scenarios.beta(0, b, s);
        if tons <= 0.0 {
            return 0.0;
        }
        (1..self.num_primary()).map(|p| self.scenarios.beta(p, b, s)).sum::<f64>() / tons
    }

    pub fn location_by_kind(&self, kind: LocationKind) -> Vec<LocationId> {
        self.locations.iter().filter(|l| l.kind == kind).map(|l| l.id).collect()
    }
}

/// Kahn topological sort over the precedence relation; also returns the
/// successor lists. Fails on a cycle.
fn topo_sort_blocks(blocks: &[Block]) -> Result<(Vec<BlockId>, Vec<Vec<BlockId>>), ModelError> {
    let n = blocks.len();
    let mut succs = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for b in blocks {
        indeg[b.id as usize] = b.preds.len();
        for &p in &b.preds {
            succs[p as usize].push(b.id);
        }
    }
    let mut ready: Vec<BlockId> =
        (0..n as BlockId).filter(|&b| indeg[b as usize] == 0).collect();
    let mut order = Vec::with_capacity(n);
    // Pop smallest id first so the order is canonical.
    ready.sort_unstable_by(|a, b| b.cmp(a));
    while let Some(b) = ready.pop() {
        order.push(b);
        for &sc in &succs[b as usize] {
            indeg[sc as usize] -= 1;
            if indeg[sc as usize] == 0 {
                let pos = ready.binary_search_by(|x| sc.cmp(x)).unwrap_or_else(|e| e);
                ready.insert(pos, sc);
            }
        }
    }
    if order.len() != n {
        return Err(ModelError::InvalidInstance("precedence relation has a cycle".into()));
    }
    Ok((order, succs))
}

fn check_flow_dag(num_locations: usize, arcs: &[(LocationId, LocationId)]) -> Result<(), ModelError> {
    let mut indeg = vec![0usize; num_locations];
    let mut out = vec![Vec::new(); num_locations];
    for &(a, b) in arcs {
        indeg[b as usize] += 1;
        out[a as usize].push(b as usize);
    }
    let mut stack: Vec<usize> = (0..num_locations).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = stack.pop() {
        seen += 1;
        for &j in &out[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                stack.push(j);
            }
        }
    }
    if seen != num_locations {
        return Err(ModelError::InvalidInstance("flow graph has a cycle".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topo_sort_detects_cycle() {
        let blocks = vec![
            Block { id: 0, mine: 0, pos: [0, 0, 0], tonnage: 1.0, preds: vec![1] },
            Block { id: 1, mine: 0, pos: [1, 0, 0], tonnage: 1.0, preds: vec![0] },
        ];
        assert!(topo_sort_blocks(&blocks).is_err());
    }

    #[test]
    fn topo_sort_orders_preds_first() {
        let blocks = vec![
            Block { id: 0, mine: 0, pos: [0, 0, 1], tonnage: 1.0, preds: vec![2] },
            Block { id: 1, mine: 0, pos: [1, 0, 0], tonnage: 1.0, preds: vec![] },
            Block { id: 2, mine: 0, pos: [0, 0, 0], tonnage: 1.0, preds: vec![] },
        ];
        let (order, succs) = topo_sort_blocks(&blocks).unwrap();
        let pos = |b: BlockId| order.iter().position(|&x| x == b).unwrap();
        assert!(pos(2) < pos(0));
        assert_eq!(succs[2], vec![0]);
    }
}
