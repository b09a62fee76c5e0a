//! The hyper-heuristic search engine: a two-stage simulated annealing loop
//! over a registry of perturbation heuristics.
//!
//! Stage 1 applies every heuristic once in random order (accepting each
//! result) to size up the landscape and calibrate the starting temperature.
//! Stage 2 repeatedly samples a heuristic with probability proportional to
//! its final score, applies it, measures the objective change and cost,
//! updates improvement/damage rates, makes non-improving heuristics tabu for
//! a random spell, and accepts or rejects the move with the annealing rule.
//! Every `epoch_len` iterations the scores are normalized, the adaptive
//! score is refreshed, an attached agent observes the epoch and contributes
//! its own score vector, and all tabu status is revoked.

mod annealing;
mod scoreboard;
mod trace;

pub use annealing::{calibrate_initial_temp, sa_accept, AnnealingSchedule};
pub use scoreboard::{
    adaptive_score, damage_rate, final_score, improvement_rate, normalized, EpochScores,
    Scoreboard,
};
pub use trace::{EpochRecord, IterationRecord, SearchTrace, TRACE_CSV_HEADER};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{EvalError, IncrementalEvaluator};
use crate::heuristics::{apply_heuristic, HeuristicDescriptor, MoveCtx};
use crate::model::{check_feasibility, MiningComplexInstance, ModelError, Solution};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("registry is empty")]
    EmptyRegistry,
    #[error("no stopping criterion: set max_iterations and/or max_wall_secs")]
    NoStoppingCriterion,
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("initial solution is infeasible")]
    InfeasibleInitial,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How per-move cost `T(h)` is measured. The deterministic mode charges a
/// fixed rate per touched index, which keeps whole traces bit-reproducible;
/// wall-clock mode measures the apply-plus-evaluate span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    Deterministic,
    WallClock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoppingCriterion {
    /// Cap on total heuristic applications (both stages).
    pub max_iterations: Option<u64>,
    pub max_wall_secs: Option<f64>,
    /// Stop once the best objective reaches this value.
    pub target_objective: Option<f64>,
}

impl Default for StoppingCriterion {
    fn default() -> Self {
        Self { max_iterations: Some(100_000), max_wall_secs: None, target_objective: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Epoch length ζ between score synchronizations.
    pub epoch_len: u64,
    /// Memory of the adaptive score blend.
    pub alpha: f64,
    /// Agent contribution to the final score.
    pub lambda_rl: f64,
    pub tabu_min: u32,
    pub tabu_max: u32,
    pub stopping: StoppingCriterion,
    pub timing: TimingMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            epoch_len: 100,
            alpha: 0.3,
            lambda_rl: 0.0,
            tabu_min: 5,
            tabu_max: 20,
            stopping: StoppingCriterion::default(),
            timing: TimingMode::Deterministic,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<(), SearchError> {
        if self.epoch_len == 0 {
            return Err(SearchError::InvalidConfig("epoch_len must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.lambda_rl) {
            return Err(SearchError::InvalidConfig("alpha and lambda_rl must lie in [0,1]".into()));
        }
        if self.tabu_min > self.tabu_max {
            return Err(SearchError::InvalidConfig("tabu_min exceeds tabu_max".into()));
        }
        if self.stopping.max_iterations.is_none() && self.stopping.max_wall_secs.is_none() {
            return Err(SearchError::NoStoppingCriterion);
        }
        Ok(())
    }
}

/// Normalized per-epoch score snapshots, newest last; the agent's state
/// encoding reads the most recent window.
#[derive(Debug, Clone, Default)]
pub struct ScoreHistory {
    pub epochs: Vec<EpochScores>,
}

/// Hook called once per epoch. Implementations observe the score history,
/// bank the epoch reward, and return their score vector `S2` (a probability
/// vector over the registry).
pub trait EpochHook {
    fn epoch_step(&mut self, history: &ScoreHistory, reward: f64) -> Vec<f64>;
}

#[derive(Debug)]
pub struct RunResult {
    pub best_solution: Solution,
    pub best_objective: f64,
    pub initial_objective: f64,
    pub trace: SearchTrace,
}

/// Runs the full two-stage search. All randomness derives from named
/// streams of `seed`; with deterministic timing, identical inputs give
/// bit-identical traces whether or not an agent is attached at
/// `lambda_rl = 0`.
pub fn run(
    inst: &MiningComplexInstance,
    initial: Solution,
    registry: &[HeuristicDescriptor],
    config: &SearchConfig,
    schedule: &AnnealingSchedule,
    mut agent: Option<&mut dyn EpochHook>,
    seed: u64,
) -> Result<RunResult, SearchError> {
    config.validate()?;
    let n = registry.len();
    if n == 0 {
        return Err(SearchError::EmptyRegistry);
    }
    if !check_feasibility(inst, &initial)?.is_feasible() {
        return Err(SearchError::InfeasibleInitial);
    }

    let mut sol = initial;
    let mut ev = IncrementalEvaluator::new(inst, &sol);
    let initial_objective = ev.objective();
    let mut current_f = initial_objective;
    let mut best_f = current_f;
    let mut best_sol = sol.clone();

    let mut sel_rng = named_stream(seed, "selection", 0);
    let mut acc_rng = named_stream(seed, "acceptance", 0);
    let mut tabu_rng = named_stream(seed, "tabu", 0);
    let mut stage1_rng = named_stream(seed, "stage1", 0);
    let mut heur_rngs: Vec<ChaCha8Rng> =
        (0..n).map(|i| named_stream(seed, "heuristic", i as u64)).collect();

    let start = std::time::Instant::now();
    let mut trace = SearchTrace::default();
    let mut iter: u64 = 0;

    let stopped = |iter: u64, best: f64, start: &std::time::Instant| -> bool {
        if let Some(max) = config.stopping.max_iterations {
            if iter >= max {
                return true;
            }
        }
        if let Some(max) = config.stopping.max_wall_secs {
            if start.elapsed().as_secs_f64() >= max {
                return true;
            }
        }
        if let Some(target) = config.stopping.target_objective {
            if best >= target {
                return true;
            }
        }
        false
    };

    macro_rules! apply_one {
        ($h:expr) => {{
            let h: usize = $h;
            let t_start = std::time::Instant::now();
            let changed = {
                let ctx = MoveCtx {
                    inst,
                    mined: ev.mined(),
                    penalty_by_period: Some(ev.penalty_by_period()),
                };
                apply_heuristic(&registry[h], &ctx, &mut sol, &mut heur_rngs[h])
            };
            let delta = match &changed {
                Some((fp, _)) => ev.apply(&sol, fp),
                None => 0.0,
            };
            let time_s = match config.timing {
                TimingMode::WallClock => t_start.elapsed().as_secs_f64().max(1e-6),
                TimingMode::Deterministic => {
                    let work = changed
                        .as_ref()
                        .map(|(fp, _)| fp.work_units(inst.num_scenarios()))
                        .unwrap_or(0);
                    1e-6 * (1 + work) as f64
                }
            };
            (delta, time_s, changed)
        }};
    }

    // Stage 1: give every heuristic one chance, accepting whatever it does.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stage1_rng);
    let mut worsening = Vec::new();
    let mut magnitudes = Vec::new();
    for h in order {
        if stopped(iter, best_f, &start) {
            break;
        }
        iter += 1;
        let (delta, time_s, _changed) = apply_one!(h);
        if delta < 0.0 {
            worsening.push(-delta);
        }
        if delta != 0.0 {
            magnitudes.push(delta.abs());
        }
        current_f = ev.objective();
        if current_f > best_f {
            best_f = current_f;
            best_sol = sol.clone();
        }
        trace.iterations.push(IterationRecord {
            iter,
            heuristic: h as u16,
            delta_f: delta,
            time_s,
            accepted: true,
            current_f,
            best_f,
            temp: 0.0,
        });
    }

    let mut temp = schedule
        .initial_temp
        .unwrap_or_else(|| calibrate_initial_temp(&worsening, &magnitudes));
    let mut sb = Scoreboard::new(n);
    let mut history = ScoreHistory::default();
    let mut epoch_reward = 0.0;
    let mut new_best_epoch = false;
    let mut stage2_iter: u64 = 0;
    let mut epoch_idx: u64 = 0;

    // Stage 2: score-driven selection under the annealing acceptance rule.
    while !stopped(iter, best_f, &start) {
        iter += 1;
        stage2_iter += 1;
        let h = sb.select(&mut sel_rng);
        sb.eta[h] += 1;
        sb.age_tabu();
        let (delta, time_s, changed) = apply_one!(h);
        sb.record_measures(h, delta, time_s);
        if delta <= 0.0 {
            sb.make_tabu(h, &mut tabu_rng, config.tabu_min, config.tabu_max);
        }
        let accepted = sa_accept(delta, temp, &mut acc_rng);
        if accepted {
            current_f = ev.objective();
            epoch_reward += delta;
            if current_f > best_f {
                best_f = current_f;
                best_sol = sol.clone();
                new_best_epoch = true;
            }
        } else if let Some((fp, undo)) = &changed {
            undo.undo(&mut sol);
            ev.revert(&sol, fp);
            current_f = ev.objective();
        }
        trace.iterations.push(IterationRecord {
            iter,
            heuristic: h as u16,
            delta_f: delta,
            time_s,
            accepted,
            current_f,
            best_f,
            temp,
        });

        if stage2_iter % schedule.iters_per_cooling == 0 {
            temp *= schedule.cooling_factor;
        }
        if stage2_iter % config.epoch_len == 0 {
            epoch_idx += 1;
            let snapshot = sb.begin_epoch(config.alpha, new_best_epoch);
            history.epochs.push(snapshot.clone());
            let s2 = match agent {
                Some(ref mut a) => Some(a.epoch_step(&history, epoch_reward)),
                None => None,
            };
            sb.finish_epoch(config.lambda_rl, s2.as_deref());
            trace.epochs.push(EpochRecord {
                epoch: epoch_idx,
                iter,
                beta: sb.beta(),
                reward: epoch_reward,
                new_best: new_best_epoch,
                sf: sb.sf.clone(),
                s1: sb.s1.clone(),
                pi1: snapshot.pi1,
                pi2: snapshot.pi2,
                s2,
            });
            epoch_reward = 0.0;
            new_best_epoch = false;
        }
    }

    Ok(RunResult { best_solution: best_sol, best_objective: best_f, initial_objective, trace })
}

/// Independent deterministic RNG stream named by `(seed, name, index)`.
pub fn named_stream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    key[8..16].copy_from_slice(&h.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests;
