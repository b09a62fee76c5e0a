use crate::heuristics::{build_registry, RegistryConfig};
use crate::model::{build_initial_solution, generate_synthetic_instance, GeneratorConfig};

use super::*;

fn small_instance() -> MiningComplexInstance {
    let cfg = GeneratorConfig {
        grid: [5, 5, 3],
        num_scenarios: 3,
        horizon: 4,
        clusters_per_mine: 4,
        num_processors: 2,
        num_stockpiles: 1,
        ..Default::default()
    };
    generate_synthetic_instance(&cfg, 60).unwrap()
}

fn quick_config(iters: u64) -> SearchConfig {
    SearchConfig {
        stopping: StoppingCriterion {
            max_iterations: Some(iters),
            max_wall_secs: None,
            target_objective: None,
        },
        ..Default::default()
    }
}

fn run_baseline(inst: &MiningComplexInstance, seed: u64, iters: u64) -> RunResult {
    let registry = build_registry(inst, &RegistryConfig::default());
    let initial = build_initial_solution(inst, seed ^ 0xabc);
    run(
        inst,
        initial,
        &registry,
        &quick_config(iters),
        &AnnealingSchedule::default(),
        None,
        seed,
    )
    .unwrap()
}

#[test]
fn identical_seeds_reproduce_the_trace_bitwise() {
    let inst = small_instance();
    let a = run_baseline(&inst, 11, 1200);
    let b = run_baseline(&inst, 11, 1200);
    assert_eq!(a.trace.csv_string(), b.trace.csv_string());
    assert_eq!(a.best_objective, b.best_objective);
    let c = run_baseline(&inst, 12, 1200);
    assert_ne!(a.trace.csv_string(), c.trace.csv_string());
}

#[test]
fn best_objective_is_monotone_and_improves() {
    let inst = small_instance();
    let res = run_baseline(&inst, 5, 3000);
    let mut prev = f64::NEG_INFINITY;
    for (_, best) in res.trace.best_curve() {
        assert!(best >= prev);
        prev = best;
    }
    assert!(
        res.best_objective > res.initial_objective,
        "3000 iterations should beat the random start: {} vs {}",
        res.best_objective,
        res.initial_objective
    );
}

#[test]
fn score_vector_stays_normalized_and_beta_on_lattice() {
    let inst = small_instance();
    let res = run_baseline(&inst, 9, 2500);
    assert!(!res.trace.epochs.is_empty());
    for e in &res.trace.epochs {
        let sum: f64 = e.sf.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12, "epoch {}: sum {}", e.epoch, sum);
        assert!(e.sf.iter().all(|&x| x >= 0.0));
        let tenths = e.beta * 10.0;
        assert!((tenths - tenths.round()).abs() < 1e-12 && (0.0..=10.0).contains(&tenths));
    }
}

#[test]
fn missing_stopping_criterion_is_rejected() {
    let inst = small_instance();
    let registry = build_registry(&inst, &RegistryConfig::default());
    let initial = build_initial_solution(&inst, 0);
    let cfg = SearchConfig {
        stopping: StoppingCriterion {
            max_iterations: None,
            max_wall_secs: None,
            target_objective: Some(1.0),
        },
        ..Default::default()
    };
    let err = run(&inst, initial, &registry, &cfg, &AnnealingSchedule::default(), None, 1);
    assert!(matches!(err, Err(SearchError::NoStoppingCriterion)));
}

/// An agent that returns an arbitrary (but valid) probability vector; with
/// `lambda_rl = 0` its presence must not shift the search by a single bit.
struct NoisyHook {
    rng: ChaCha8Rng,
}

impl EpochHook for NoisyHook {
    fn epoch_step(&mut self, history: &ScoreHistory, _reward: f64) -> Vec<f64> {
        use rand::Rng;
        let n = history.epochs.last().unwrap().s1.len();
        let raw: Vec<f64> = (0..n).map(|_| self.rng.gen::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        raw.iter().map(|x| x / sum).collect()
    }
}

#[test]
fn zero_lambda_is_invariant_to_agent_attachment() {
    let inst = small_instance();
    let registry = build_registry(&inst, &RegistryConfig::default());
    let cfg = quick_config(1500);
    let schedule = AnnealingSchedule::default();
    let without = run(
        &inst,
        build_initial_solution(&inst, 1),
        &registry,
        &cfg,
        &schedule,
        None,
        77,
    )
    .unwrap();
    let mut hook = NoisyHook { rng: named_stream(999, "hook", 0) };
    let with = run(
        &inst,
        build_initial_solution(&inst, 1),
        &registry,
        &cfg,
        &schedule,
        Some(&mut hook),
        77,
    )
    .unwrap();
    assert_eq!(without.trace.csv_string(), with.trace.csv_string());
    assert_eq!(without.best_objective, with.best_objective);
}

#[test]
fn target_objective_stops_early() {
    let inst = small_instance();
    let registry = build_registry(&inst, &RegistryConfig::default());
    let initial = build_initial_solution(&inst, 4);
    let start = IncrementalEvaluatorProbe::objective(&inst, &initial);
    let cfg = SearchConfig {
        stopping: StoppingCriterion {
            max_iterations: Some(100_000),
            max_wall_secs: None,
            target_objective: Some(start + 1.0),
        },
        ..Default::default()
    };
    let res =
        run(&inst, initial, &registry, &cfg, &AnnealingSchedule::default(), None, 3).unwrap();
    assert!(res.best_objective >= start + 1.0);
    assert!((res.trace.iterations.len() as u64) < 100_000);
}

struct IncrementalEvaluatorProbe;

impl IncrementalEvaluatorProbe {
    fn objective(inst: &MiningComplexInstance, sol: &Solution) -> f64 {
        crate::evaluator::IncrementalEvaluator::new(inst, sol).objective()
    }
}
