//! Constraint checking for candidate schedules.

use super::{BlockId, GroupId, LocationId, LocationKind, MiningComplexInstance, ModelError, Solution};

const SIMPLEX_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Block mined before one of its predecessors.
    Precedence { block: BlockId, pred: BlockId, block_period: u32, pred_period: Option<u32> },
    /// Destination not in the group's allowed set.
    DestinationNotAllowed { group: GroupId, period: u32, dest: LocationId },
    /// Outgoing proportions break the node's simplex rule.
    StreamSum { location: LocationId, period: u32, scenario: usize, sum: f64 },
    /// A single proportion outside `[0, 1]`.
    StreamRange { arc: usize, period: u32, scenario: usize, value: f64 },
}

/// Every violated constraint, with indices. An empty report means the
/// solution is feasible.
#[derive(Debug, Clone, Default)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks precedence, destination-policy and stream-simplex constraints.
/// Structural mismatches (wrong array sizes, out-of-range indices) are
/// reported as [`ModelError::MalformedSolution`], distinct from violations.
pub fn check_feasibility(
    inst: &MiningComplexInstance,
    sol: &Solution,
) -> Result<ViolationReport, ModelError> {
    let t_max = inst.horizon as u32;
    let ns = inst.num_scenarios();
    if sol.periods_raw().len() != inst.num_blocks()
        || sol.destinations_raw().len() != inst.groups.len() * inst.horizon
        || sol.streams_raw().len() != inst.flow_arcs.len() * inst.horizon * ns
        || sol.horizon() != inst.horizon
        || sol.num_scenarios() != ns
    {
        return Err(ModelError::MalformedSolution("solution shape does not match instance".into()));
    }
    for (b, &t) in sol.periods_raw().iter().enumerate() {
        if t > t_max {
            return Err(ModelError::MalformedSolution(format!(
                "block {b} mined in period {t} beyond horizon {t_max}"
            )));
        }
    }
    for (i, &d) in sol.destinations_raw().iter().enumerate() {
        if d as usize >= inst.locations.len() {
            return Err(ModelError::MalformedSolution(format!(
                "destination entry {i} references unknown location {d}"
            )));
        }
    }

    let mut report = ViolationReport::default();

    for block in &inst.blocks {
        let Some(t) = sol.period(block.id) else { continue };
        for &p in &block.preds {
            match sol.period(p) {
                Some(tp) if tp <= t => {}
                other => report.violations.push(Violation::Precedence {
                    block: block.id,
                    pred: p,
                    block_period: t,
                    pred_period: other,
                }),
            }
        }
    }

    for g in &inst.groups {
        for t in 1..=t_max {
            let d = sol.destination(g.id, t);
            if !g.destinations.contains(&d) {
                report.violations.push(Violation::DestinationNotAllowed {
                    group: g.id,
                    period: t,
                    dest: d,
                });
            }
        }
    }

    for loc in &inst.locations {
        if loc.outgoing.is_empty() {
            continue;
        }
        for t in 1..=t_max {
            for s in 0..ns {
                let mut sum = 0.0;
                for &arc in &loc.outgoing {
                    let y = sol.stream(arc, t, s);
                    if !(-SIMPLEX_EPS..=1.0 + SIMPLEX_EPS).contains(&y) {
                        report.violations.push(Violation::StreamRange {
                            arc,
                            period: t,
                            scenario: s,
                            value: y,
                        });
                    }
                    sum += y;
                }
                let ok = match loc.kind {
                    LocationKind::Stockpile => sum <= 1.0 + SIMPLEX_EPS && sum >= -SIMPLEX_EPS,
                    _ => (sum - 1.0).abs() <= SIMPLEX_EPS,
                };
                if !ok {
                    report.violations.push(Violation::StreamSum {
                        location: loc.id,
                        period: t,
                        scenario: s,
                        sum,
                    });
                }
            }
        }
    }

    Ok(report)
}
