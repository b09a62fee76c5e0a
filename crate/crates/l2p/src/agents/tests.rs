use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::search::{EpochHook, EpochScores, ScoreHistory};

use super::*;

fn history_with(n: usize, epochs: usize) -> ScoreHistory {
    let mut h = ScoreHistory::default();
    for e in 0..epochs {
        let mut pi1 = vec![0.0; n];
        pi1[e % n] = 1.0;
        h.epochs.push(EpochScores {
            pi1,
            pi2: vec![1.0 / n as f64; n],
            s1: vec![1.0 / n as f64; n],
        });
    }
    h
}

#[test]
fn state_tensor_shape_and_padding() {
    let (n, window) = (2, 3);
    let empty = encode_state(&ScoreHistory::default(), window, n);
    assert_eq!(empty.len(), window * 3 * n);
    assert!(empty.iter().all(|&x| x == 0.0));

    let h = history_with(n, 1);
    let s = encode_state(&h, window, n);
    // Two leading epochs padded with zeros, the single real epoch sits last.
    assert!(s[..2 * 3 * n].iter().all(|&x| x == 0.0));
    let tail = &s[2 * 3 * n..];
    assert_eq!(tail[..n], [1.0, 0.0]);
    // Each (epoch, measure) slice sums to one or zero.
    let full = encode_state(&history_with(n, 5), window, n);
    for slot in 0..window {
        for m in 0..3 {
            let base = slot * 3 * n + m * n;
            let sum: f64 = full[base..base + n].iter().sum();
            assert!((sum - 1.0).abs() < 1e-12 || sum == 0.0, "slice sums to {sum}");
        }
    }
}

#[test]
fn newest_epoch_is_last() {
    let n = 3;
    let h = history_with(n, 7);
    let s = encode_state(&h, 2, n);
    // Last epoch index 6 -> pi1 one-hot at 6 % 3 == 0.
    let tail = &s[3 * n..];
    assert_eq!(tail[..n], [1.0, 0.0, 0.0]);
}

#[test]
fn standardize_examples() {
    let out = standardize_returns(&[1.0, 2.0, 3.0]);
    assert!((out[0] + 1.2247).abs() < 1e-4);
    assert!(out[1].abs() < 1e-12);
    assert!((out[2] - 1.2247).abs() < 1e-4);
    assert_eq!(standardize_returns(&[5.0, 5.0, 5.0]), vec![0.0, 0.0, 0.0]);
    assert_eq!(standardize_returns(&[7.0]), vec![0.0]);
    let long: Vec<f64> = (0..50).map(|i| (i as f64 * 1.37).sin() * 3.0).collect();
    let st = standardize_returns(&long);
    let mean: f64 = st.iter().sum::<f64>() / st.len() as f64;
    let var: f64 = st.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / st.len() as f64;
    assert!(mean.abs() <= 1e-9);
    assert!((var.sqrt() - 1.0).abs() <= 1e-6);
}

fn toy_config() -> AgentConfig {
    AgentConfig {
        window: 2,
        hidden: vec![8, 8],
        update_period: 5,
        ..Default::default()
    }
}

#[test]
fn zero_weight_actor_with_zero_noise_gives_uniform_scores() {
    let n = 4;
    let mut cfg = toy_config();
    cfg.sigma = 0.0;
    let mut agent = Agent::new(AgentVariant::A2c, n, cfg, 3).unwrap();
    // Zero the actor path.
    if let Some(ac) = agent.actor_critic_mut() {
        let zeros = vec![0.0; ac.actor_group_params().len()];
        ac.set_actor_group_params(&zeros);
    }
    let h = history_with(n, 3);
    let s2 = agent.epoch_step(&h, 0.0);
    for &p in &s2 {
        assert!((p - 1.0 / n as f64).abs() < 1e-12);
    }
}

#[test]
fn s2_is_always_a_probability_vector() {
    let n = 5;
    let mut agent = Agent::new(AgentVariant::Ppo, n, toy_config(), 11).unwrap();
    for e in 1..20 {
        let h = history_with(n, e);
        let s2 = agent.epoch_step(&h, (e as f64) - 9.0);
        let sum: f64 = s2.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        assert!(s2.iter().all(|&p| p >= 0.0));
    }
}

#[test]
fn identical_seeds_reproduce_s2() {
    let n = 3;
    let run = |seed: u64| -> Vec<Vec<f64>> {
        let mut agent = Agent::new(AgentVariant::Sac, n, toy_config(), seed).unwrap();
        (1..10).map(|e| agent.epoch_step(&history_with(n, e), e as f64)).collect()
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}

#[test]
fn updates_trigger_on_the_configured_period() {
    let n = 3;
    let mut agent = Agent::new(AgentVariant::A2c, n, toy_config(), 1).unwrap();
    let mut updates = Vec::new();
    for e in 1..=20u64 {
        agent.epoch_step(&history_with(n, e as usize), 1.0);
        updates.push(agent.updates_done());
    }
    // First update at epoch 5 (with 4 banked transitions), then every 5.
    assert_eq!(updates[3], 0);
    assert_eq!(updates[4], 1);
    assert_eq!(updates[9], 2);
    assert_eq!(updates[19], 4);
}

#[test]
fn frozen_agent_emits_constant_scores_for_constant_state() {
    let n = 3;
    let mut cfg = toy_config();
    cfg.sigma = 0.0;
    cfg.actor_lr = 0.0;
    cfg.critic_lr = 0.0;
    let mut agent = Agent::new(AgentVariant::A2c, n, cfg, 9).unwrap();
    let h = history_with(n, 4);
    let first = agent.epoch_step(&h, 1.0);
    for _ in 0..10 {
        assert_eq!(agent.epoch_step(&h, 1.0), first);
    }
}

#[test]
fn gamma_zero_reduces_advantage_to_reward() {
    // With a zero critic and gamma = 0, the n-step return of each transition
    // is its own reward, so the advantage equals the reward.
    let n = 2;
    let state_dim = 2 * 3 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ac = SharedActorCritic::init(state_dim, n, &[8, 8], &mut rng);
    let zeros = vec![0.0; ac.critic_group_params().len()];
    ac.set_critic_group_params(&zeros);
    let rewards = [1.5, -0.5, 2.0];
    let gamma = 0.0;
    let mut r = ac.critic_value(&vec![0.0; state_dim]); // bootstrap, == 0
    let mut returns = vec![0.0; rewards.len()];
    for i in (0..rewards.len()).rev() {
        r = gamma * r + rewards[i];
        returns[i] = r;
    }
    for (ret, rew) in returns.iter().zip(&rewards) {
        let advantage = ret - ac.critic_value(&vec![0.0; state_dim]);
        assert_eq!(advantage, *rew);
    }
}

fn toy_a2c_batch(n: usize, state_dim: usize, rng: &mut ChaCha8Rng) -> A2cBatch {
    let len = 4;
    A2cBatch {
        states: (0..len)
            .map(|_| (0..state_dim).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect(),
        actions: (0..len)
            .map(|_| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect(),
        returns: (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        advantages: (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn fd_check<F: Fn(&SharedActorCritic) -> f64>(
    ac: &SharedActorCritic,
    loss: F,
    analytic_actor: &[f64],
    analytic_critic: &[f64],
) -> f64 {
    let h = 1e-5;
    let mut probe = ac.clone();
    let base_a = ac.actor_group_params();
    let mut fd_a = Vec::with_capacity(base_a.len());
    for i in 0..base_a.len() {
        let mut p = base_a.clone();
        p[i] = base_a[i] + h;
        probe.set_actor_group_params(&p);
        let up = loss(&probe);
        p[i] = base_a[i] - h;
        probe.set_actor_group_params(&p);
        let down = loss(&probe);
        fd_a.push((up - down) / (2.0 * h));
    }
    probe.set_actor_group_params(&base_a);
    let base_c = ac.critic_group_params();
    let mut fd_c = Vec::with_capacity(base_c.len());
    for i in 0..base_c.len() {
        let mut p = base_c.clone();
        p[i] = base_c[i] + h;
        probe.set_critic_group_params(&p);
        let up = loss(&probe);
        p[i] = base_c[i] - h;
        probe.set_critic_group_params(&p);
        let down = loss(&probe);
        fd_c.push((up - down) / (2.0 * h));
    }
    max_rel_err(analytic_actor, &fd_a).max(max_rel_err(analytic_critic, &fd_c))
}

#[test]
fn a2c_gradients_match_finite_differences() {
    let (n, window) = (3, 2);
    let state_dim = window * 3 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let ac = SharedActorCritic::init(state_dim, n, &[8, 8], &mut rng);
    let batch = toy_a2c_batch(n, state_dim, &mut rng);
    let (ga, gc) = ac.a2c_grads(&batch, 0.05, 0.01);
    let err = fd_check(&ac, |p| p.a2c_loss(&batch, 0.05, 0.01), &ga, &gc);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn ppo_gradients_match_finite_differences() {
    let (n, window) = (3, 2);
    let state_dim = window * 3 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let ac = SharedActorCritic::init(state_dim, n, &[8, 8], &mut rng);
    let base = toy_a2c_batch(n, state_dim, &mut rng);
    let batch = PpoBatch {
        logp_old: base
            .states
            .iter()
            .zip(&base.actions)
            .map(|(s, a)| gauss_logp(a, &ac.actor_mean(s), 0.05))
            .collect(),
        states: base.states,
        actions: base.actions,
        advantages: base.advantages,
        value_targets: base.returns,
    };
    let (ga, gc) = ac.ppo_grads(&batch, 0.05, 0.2, 0.5, 0.01);
    let err = fd_check(&ac, |p| p.ppo_loss(&batch, 0.05, 0.2, 0.5, 0.01), &ga, &gc);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn ppo_ratio_is_one_at_collection() {
    let (n, window) = (3, 2);
    let state_dim = window * 3 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let ac = SharedActorCritic::init(state_dim, n, &[8], &mut rng);
    let state: Vec<f64> = (0..state_dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mu = ac.actor_mean(&state);
    let action: Vec<f64> = mu.iter().map(|m| m + 0.05 * 0.7).collect();
    let logp_old = gauss_logp(&action, &mu, 0.05);
    let ratio = (gauss_logp(&action, &ac.actor_mean(&state), 0.05) - logp_old).exp();
    assert!((ratio - 1.0).abs() <= 1e-10);
}

#[test]
fn clipped_surrogate_examples() {
    // Ratio one leaves the clip inactive.
    assert_eq!(clipped_surrogate(1.0, 2.5, 0.2), 2.5);
    // Positive advantage, ratio above the ceiling: the clipped term wins.
    assert_eq!(clipped_surrogate(2.0, 1.0, 0.2), 1.2);
    // Negative advantage, ratio below the floor: min picks the clipped term.
    assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
}

fn toy_sac(n: usize, rng: &mut ChaCha8Rng) -> (SacNets, Vec<SacVItem>, Vec<SacQItem>, Vec<SacPolicyItem>) {
    let state_dim = 2 * 3 * n;
    let nets = SacNets::init(state_dim, n, &[8, 8], rng);
    let state = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..state_dim).map(|_| rng.gen_range(0.0..1.0)).collect()
    };
    let v_items: Vec<SacVItem> = (0..4)
        .map(|_| SacVItem { state: state(rng), target: rng.gen_range(-1.0..1.0) })
        .collect();
    let q_items: Vec<SacQItem> = (0..4)
        .map(|_| SacQItem {
            state: state(rng),
            action: (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            target: rng.gen_range(-1.0..1.0),
        })
        .collect();
    let p_items: Vec<SacPolicyItem> = (0..4)
        .map(|_| SacPolicyItem {
            state: state(rng),
            noise: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        })
        .collect();
    (nets, v_items, q_items, p_items)
}

#[test]
fn sac_gradients_match_finite_differences() {
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let (nets, v_items, q_items, p_items) = toy_sac(n, &mut rng);
    let h = 1e-5;

    let fd = |params: &[f64], set: &dyn Fn(&mut SacNets, &[f64]), eval: &dyn Fn(&SacNets) -> f64| -> Vec<f64> {
        let mut out = Vec::with_capacity(params.len());
        let mut probe = nets.clone();
        for i in 0..params.len() {
            let mut p = params.to_vec();
            p[i] = params[i] + h;
            set(&mut probe, &p);
            let up = eval(&probe);
            p[i] = params[i] - h;
            set(&mut probe, &p);
            let down = eval(&probe);
            out.push((up - down) / (2.0 * h));
        }
        out
    };

    let gv = nets.v_loss_grads(&v_items);
    let fv = fd(
        &nets.v.flatten_params(),
        &|p, flat| p.v.set_params(flat),
        &|p| p.v_loss(&v_items),
    );
    assert!(max_rel_err(&gv, &fv) <= 1e-4, "V loss: {}", max_rel_err(&gv, &fv));

    let gq = nets.q_loss_grads(&q_items);
    let fq = fd(
        &nets.q.flatten_params(),
        &|p, flat| p.q.set_params(flat),
        &|p| p.q_loss(&q_items),
    );
    assert!(max_rel_err(&gq, &fq) <= 1e-4, "Q loss: {}", max_rel_err(&gq, &fq));

    let gp = nets.policy_loss_grads(&p_items, 0.05, 0.05);
    let fp = fd(
        &nets.actor.flatten_params(),
        &|p, flat| p.actor.set_params(flat),
        &|p| p.policy_loss(&p_items, 0.05, 0.05),
    );
    assert!(max_rel_err(&gp, &fp) <= 1e-4, "policy loss: {}", max_rel_err(&gp, &fp));
}

#[test]
fn sac_target_tracks_online_network() {
    let n = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let (mut nets, _, _, _) = toy_sac(n, &mut rng);
    // Make target and online differ.
    let mut other = ChaCha8Rng::seed_from_u64(321);
    nets.v_target = crate::neural::Mlp::init(
        &{
            let mut v = vec![nets.v.input_size()];
            v.extend([8usize, 8]);
            v.push(1);
            v
        },
        &mut other,
    );
    // tau = 1 copies the online net outright.
    let mut full = nets.clone();
    full.ema_update_target(1.0);
    assert_eq!(full.v_target, full.v);
    // Repeated small-tau updates converge geometrically with factor 1 - tau.
    let dist = |nets: &SacNets| -> f64 {
        nets.v_target
            .flatten_params()
            .iter()
            .zip(nets.v.flatten_params())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let tau = 0.25;
    let mut prev = dist(&nets);
    for _ in 0..20 {
        nets.ema_update_target(tau);
        let now = dist(&nets);
        assert!(now <= prev * (1.0 - tau) + 1e-12);
        prev = now;
    }
}

#[test]
fn sac_value_target_reduces_to_q_without_entropy() {
    let n = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (nets, _, _, _) = toy_sac(n, &mut rng);
    let state: Vec<f64> = (0..nets.v.input_size()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mu = nets.actor.forward(&state);
    let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let fresh: Vec<f64> = mu.iter().zip(&noise).map(|(m, xi)| m + 0.05 * xi).collect();
    let q = nets.q_value(&state, &fresh);
    let logp = gauss_logp(&fresh, &mu, 0.05);
    let alpha_h = 0.0;
    assert_eq!(q - alpha_h * logp, q);
}

#[test]
fn checkpoint_round_trip_restores_the_policy() {
    let n = 3;
    let mut cfg = toy_config();
    cfg.sigma = 0.0;
    let mut agent = Agent::new(AgentVariant::Ppo, n, cfg.clone(), 77).unwrap();
    let h = history_with(n, 4);
    let expect = agent.epoch_step(&h, 0.5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.l2pw");
    agent.save(&path).unwrap();
    let mut other = Agent::new(AgentVariant::Ppo, n, cfg, 78).unwrap();
    other.load(&path).unwrap();
    let got = other.epoch_step(&h, 0.5);
    assert_eq!(expect, got);
}
