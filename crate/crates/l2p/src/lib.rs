//! Simultaneous stochastic optimization of mining complexes with a
//! learn-to-perturb (L2P) hyper-heuristic.
//!
//! The solver schedules block extraction, destination policies and processing
//! streams for a mining complex under geological uncertainty. A simulated
//! annealing engine selects among low-level perturbation heuristics using an
//! adaptive score function, optionally blended with the output of a
//! reinforcement-learning agent (A2C, PPO or SAC).
//!
//! The crate is organized around the pipeline:
//!
//! * [`model`] — instance data model, synthetic generation, block grouping,
//!   solution representation and feasibility checking.
//! * [`evaluator`] — the two-stage stochastic objective: flow propagation,
//!   deviation penalties and incremental re-evaluation.
//! * [`heuristics`] — the four neighborhoods of perturbation heuristics and
//!   the registry exposed to the search.
//! * [`search`] — the annealing engine: scores, tabu, acceptance, cooling and
//!   epoch-wise synchronization with an agent.
//! * [`neural`] — dense networks, exact backpropagation, Adamax and gradient
//!   clipping.
//! * [`agents`] — state encoding, exploration and the A2C/PPO/SAC updates.
//! * [`harness`] — experiment runner, brute-force oracle and reporting.

pub mod agents;
pub mod evaluator;
pub mod harness;
pub mod heuristics;
pub mod model;
pub mod neural;
pub mod search;

// The guide chapters double as doctests so the book stays in sync with the
// public API. Paths are relative to this file.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            struct $name;
        };
    }
    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Model, "../../../book/src/model.md");
    chapter!(Evaluation, "../../../book/src/evaluation.md");
    chapter!(Perturbations, "../../../book/src/perturbations.md");
    chapter!(Annealing, "../../../book/src/annealing.md");
    chapter!(Agents, "../../../book/src/agents.md");
    chapter!(Experiments, "../../../book/src/experiments.md");
}
