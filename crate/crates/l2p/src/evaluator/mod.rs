//! Two-stage stochastic objective: per-scenario material flow propagation
//! through the location graph, deviation penalties against soft bounds, and
//! the discounted expected value.
//!
//! Flow semantics per period `t` and scenario `s`:
//!
//! * a mine's primary quantities are the sums over blocks extracted in `t`;
//! * material mined in `t` reaches its group's destination in `t`;
//! * material forwarded from location `i` in `t` arrives downstream in
//!   `t + 1`, attenuated by the recovery of `i`;
//! * stockpiles retain the unsent share `v · (1 - Σ y)` into `t + 1`; every
//!   other location handles only what arrives in the period.
//!
//! Hereditary attribute values, deviations and money terms follow from the
//! propagated quantities; the objective is the equal-weight scenario mean of
//! discounted revenue minus discounted deviation penalties.

mod incremental;

pub use incremental::{Footprint, IncrementalEvaluator, MinedIndex, StreamChange};

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    check_feasibility, AttrForm, MiningComplexInstance, ModelError, Recovery, Solution,
    ViolationReport,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("solution is infeasible: {} violation(s)", .0.violations.len())]
    Infeasible(ViolationReport),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Propagated quantities for a set of scenarios. Tensors are row-major with
/// the scenario axis innermost; `scenario_ids` maps that axis to scenario
/// indices of the instance.
#[derive(Debug, Clone, Serialize)]
pub struct AttributeState {
    pub scenario_ids: Vec<usize>,
    pub num_locations: usize,
    pub num_primary: usize,
    pub num_attrs: usize,
    pub horizon: usize,
    /// `[p][location][t][s]`
    pub v_p: Vec<f64>,
    /// `[attr][t][s]`
    pub v_h: Vec<f64>,
    /// `[p][location][t][s]`, recovery applied when forwarding.
    pub r: Vec<f64>,
    /// `[attr][t][s]`
    pub d_plus: Vec<f64>,
    /// `[attr][t][s]`
    pub d_minus: Vec<f64>,
}

impl AttributeState {
    #[inline]
    pub fn idx_pits(&self, p: usize, i: usize, t: u32, s: usize) -> usize {
        ((p * self.num_locations + i) * self.horizon + (t as usize - 1)) * self.scenario_ids.len()
            + s
    }

    #[inline]
    pub fn idx_hts(&self, h: usize, t: u32, s: usize) -> usize {
        (h * self.horizon + (t as usize - 1)) * self.scenario_ids.len() + s
    }

    pub fn v_p_at(&self, p: usize, i: usize, t: u32, s: usize) -> f64 {
        self.v_p[self.idx_pits(p, i, t, s)]
    }

    pub fn v_h_at(&self, h: usize, t: u32, s: usize) -> f64 {
        self.v_h[self.idx_hts(h, t, s)]
    }
}

/// Result of a full evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    /// Expected value over scenarios: mean of `per_scenario`.
    pub objective: f64,
    pub per_scenario: Vec<f64>,
    pub revenue: f64,
    pub penalty: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<AttributeState>,
}

/// Elementwise deviations from bounds: `d+ = max(0, v - U)`,
/// `d- = max(0, L - v)`.
pub fn compute_deviations(state: &mut AttributeState, inst: &MiningComplexInstance) {
    let sn = state.scenario_ids.len();
    for a in &inst.attrs {
        for t in 1..=inst.horizon as u32 {
            let (lo, up) = (a.lower[t as usize - 1], a.upper[t as usize - 1]);
            for s in 0..sn {
                let idx = state.idx_hts(a.id as usize, t, s);
                let v = state.v_h[idx];
                state.d_plus[idx] = (v - up).max(0.0);
                state.d_minus[idx] = (lo - v).max(0.0);
            }
        }
    }
}

/// Forward pass for a single scenario. Pure in its inputs; passes for
/// distinct scenarios share only the read-only instance and may run
/// concurrently.
pub fn propagate_flows(
    inst: &MiningComplexInstance,
    sol: &Solution,
    scenario: usize,
) -> Result<AttributeState, EvalError> {
    let report = check_feasibility(inst, sol)?;
    if !report.is_feasible() {
        return Err(EvalError::Infeasible(report));
    }
    let ev = IncrementalEvaluator::new_scoped(inst, sol, Some(scenario));
    Ok(ev.state_for(&[scenario]))
}

/// Full objective per the two-stage formulation. Refuses infeasible
/// solutions; the search keeps feasibility by construction, so a violation
/// here is a caller bug.
pub fn objective(
    inst: &MiningComplexInstance,
    sol: &Solution,
    retain_state: bool,
) -> Result<EvaluationReport, EvalError> {
    let report = check_feasibility(inst, sol)?;
    if !report.is_feasible() {
        return Err(EvalError::Infeasible(report));
    }
    let ev = IncrementalEvaluator::new(inst, sol);
    Ok(ev.report(retain_state))
}

/// Recovery applied when location `i` forwards primary attributes in period
/// `t`; reads the location's recovery attribute when one is configured.
#[inline]
pub(crate) fn recovery_of(
    inst: &MiningComplexInstance,
    v_h: &[f64],
    hts: impl Fn(usize, u32, usize) -> usize,
    i: usize,
    t: u32,
    s: usize,
) -> f64 {
    match inst.locations[i].recovery {
        Recovery::Constant(c) => c,
        Recovery::Attribute(h) => v_h[hts(h as usize, t, s)].clamp(0.0, 1.0),
    }
}

pub(crate) fn attr_value(
    form: &AttrForm,
    v_p_at: impl Fn(usize) -> f64,
    outgoing_share: f64,
) -> f64 {
    match form {
        AttrForm::Linear { constant, coeffs } => {
            let mut v = *constant;
            for &(p, w) in coeffs {
                v += w * v_p_at(p);
            }
            v
        }
        AttrForm::StockCarry { primary } => v_p_at(*primary) * outgoing_share,
    }
}
