//! Reinforcement-learning layer: the score history becomes a state tensor,
//! the actor's noisy output becomes the agent score vector `S2`, and the
//! policy improves online via A2C, PPO or SAC.
//!
//! The action space is continuous: a raw score per heuristic. Exploration
//! adds Gaussian noise with fixed `sigma` to the deterministic actor output;
//! the noisy raw vector is the stored action and its softmax is `S2`. Policy
//! densities are diagonal Gaussians around the actor mean with that same
//! fixed `sigma`.

mod a2c;
mod ppo;
mod replay;
mod sac;

pub use a2c::{A2cBatch, SharedActorCritic};
pub use ppo::{clipped_surrogate, PpoBatch};
pub use replay::{ReplayBuffer, Transition};
pub use sac::{SacNets, SacPolicyItem, SacQItem, SacVItem};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::{clip_grad_norm, load_checkpoint, save_checkpoint, AdamaxState, NamedTensor};
use crate::search::{named_stream, EpochHook, ScoreHistory};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
}

/// Which policy drives `S2`. `Baseline` means no agent at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentVariant {
    Baseline,
    A2c,
    Ppo,
    Sac,
}

impl std::fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AgentVariant::Baseline => "baseline",
            AgentVariant::A2c => "a2c",
            AgentVariant::Ppo => "ppo",
            AgentVariant::Sac => "sac",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for AgentVariant {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(AgentVariant::Baseline),
            "a2c" => Ok(AgentVariant::A2c),
            "ppo" => Ok(AgentVariant::Ppo),
            "sac" => Ok(AgentVariant::Sac),
            other => Err(AgentError::InvalidConfig(format!("unknown agent variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Epochs between weight updates.
    pub update_period: u64,
    /// Exploration noise scale; also the policy density scale.
    pub sigma: f64,
    /// History window length L_w.
    pub window: usize,
    pub hidden: Vec<usize>,
    pub clip_norm: f64,
    /// A2C entropy bonus on the softmax of the actor mean.
    pub entropy_coef: f64,
    pub ppo_clip: f64,
    pub ppo_value_coef: f64,
    pub ppo_entropy_coef: f64,
    pub ppo_epochs: usize,
    pub sac_alpha_h: f64,
    /// EMA weight for the SAC target value network.
    pub sac_tau: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub standardize_returns: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            actor_lr: 1e-3,
            critic_lr: 1e-4,
            update_period: 5,
            sigma: 0.05,
            window: 5,
            hidden: vec![200, 200],
            clip_norm: 1.0,
            entropy_coef: 0.01,
            ppo_clip: 0.2,
            ppo_value_coef: 0.5,
            ppo_entropy_coef: 0.01,
            ppo_epochs: 4,
            sac_alpha_h: 0.05,
            sac_tau: 0.005,
            buffer_capacity: 10_000,
            batch_size: 64,
            standardize_returns: true,
        }
    }
}

/// Flattens the most recent `window` epochs of normalized `(pi1, pi2, s1)`
/// into a `window x 3 x n` tensor, newest last, zero-padded in front.
pub fn encode_state(history: &ScoreHistory, window: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; window * 3 * n];
    let epochs = &history.epochs;
    let take = epochs.len().min(window);
    for k in 0..take {
        let e = &epochs[epochs.len() - take + k];
        let base = (window - take + k) * 3 * n;
        out[base..base + n].copy_from_slice(&e.pi1);
        out[base + n..base + 2 * n].copy_from_slice(&e.pi2);
        out[base + 2 * n..base + 3 * n].copy_from_slice(&e.s1);
    }
    out
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Zero-mean unit-variance transform with an epsilon guard; constant and
/// singleton inputs map to zeros.
pub fn standardize_returns(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean: f64 = v.iter().sum::<f64>() / n;
    let var: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    v.iter().map(|x| (x - mean) / (std + 1e-8)).collect()
}

/// Log-density of a diagonal Gaussian with fixed scale.
pub fn gauss_logp(action: &[f64], mean: &[f64], sigma: f64) -> f64 {
    let s = sigma.max(1e-8);
    let sq: f64 = action.iter().zip(mean).map(|(a, m)| (a - m) * (a - m)).sum();
    -0.5 * sq / (s * s) - action.len() as f64 * (s * (2.0 * std::f64::consts::PI).sqrt()).ln()
}

/// Entropy of `softmax(mu)` and its gradient with respect to `mu`; the
/// exploration bonus used by the on-policy variants (the fixed-scale
/// Gaussian's own entropy is constant and has no gradient).
pub fn softmax_entropy_and_grad(mu: &[f64]) -> (f64, Vec<f64>) {
    let p = softmax(mu);
    let h: f64 = -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>();
    let grad = p.iter().map(|&pk| -pk * (pk.ln() + h)).collect();
    (h, grad)
}

enum AgentNets {
    OnPolicy {
        ac: SharedActorCritic,
        actor_opt: AdamaxState,
        critic_opt: AdamaxState,
    },
    Sac {
        nets: SacNets,
        actor_opt: AdamaxState,
        q_opt: AdamaxState,
        v_opt: AdamaxState,
    },
}

struct Pending {
    state: Vec<f64>,
    action: Vec<f64>,
    mean: Vec<f64>,
    logp: f64,
}

/// A full agent: networks, optimizer state, replay storage and exploration
/// noise, driven once per epoch by the search engine.
pub struct Agent {
    pub variant: AgentVariant,
    pub config: AgentConfig,
    n: usize,
    nets: AgentNets,
    rng: ChaCha8Rng,
    replay: ReplayBuffer,
    rollout: Vec<Transition>,
    pending: Option<Pending>,
    epochs_seen: u64,
    updates_done: u64,
}

impl Agent {
    /// Builds an agent for a registry of `n` heuristics. `Baseline` is not a
    /// constructible agent; callers run the engine without a hook instead.
    pub fn new(
        variant: AgentVariant,
        n: usize,
        config: AgentConfig,
        seed: u64,
    ) -> Result<Agent, AgentError> {
        if variant == AgentVariant::Baseline {
            return Err(AgentError::InvalidConfig(
                "the baseline variant runs without an agent".into(),
            ));
        }
        if n == 0 {
            return Err(AgentError::InvalidConfig("registry is empty".into()));
        }
        if config.window == 0 || config.hidden.is_empty() {
            return Err(AgentError::InvalidConfig("window and hidden sizes must be set".into()));
        }
        let state_dim = config.window * 3 * n;
        let mut init_rng = named_stream(seed, "agent-init", 0);
        let nets = match variant {
            AgentVariant::Sac => {
                let nets = SacNets::init(state_dim, n, &config.hidden, &mut init_rng);
                let actor_opt = AdamaxState::new(nets.actor.num_params());
                let q_opt = AdamaxState::new(nets.q.num_params());
                let v_opt = AdamaxState::new(nets.v.num_params());
                AgentNets::Sac { nets, actor_opt, q_opt, v_opt }
            }
            _ => {
                let ac = SharedActorCritic::init(state_dim, n, &config.hidden, &mut init_rng);
                let actor_opt = AdamaxState::new(ac.actor_param_count());
                let critic_opt = AdamaxState::new(ac.critic_param_count());
                AgentNets::OnPolicy { ac, actor_opt, critic_opt }
            }
        };
        Ok(Agent {
            variant,
            n,
            rng: named_stream(seed, "agent-noise", 0),
            replay: ReplayBuffer::new(config.buffer_capacity),
            rollout: Vec::new(),
            pending: None,
            epochs_seen: 0,
            updates_done: 0,
            config,
            nets,
        })
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn updates_done(&self) -> u64 {
        self.updates_done
    }

    /// The shared network of the on-policy variants; `None` for SAC.
    pub fn actor_critic_mut(&mut self) -> Option<&mut SharedActorCritic> {
        match &mut self.nets {
            AgentNets::OnPolicy { ac, .. } => Some(ac),
            AgentNets::Sac { .. } => None,
        }
    }

    fn actor_mean(&self, state: &[f64]) -> Vec<f64> {
        match &self.nets {
            AgentNets::OnPolicy { ac, .. } => ac.actor_mean(state),
            AgentNets::Sac { nets, .. } => nets.actor.forward(state),
        }
    }

    /// Noisy policy output turned into a probability vector.
    pub fn act(&mut self, state: &[f64]) -> (Vec<f64>, ActionSample) {
        let mean = self.actor_mean(state);
        let action: Vec<f64> = if self.config.sigma > 0.0 {
            let normal = rand_distr::Normal::new(0.0, self.config.sigma).expect("sigma >= 0");
            mean.iter()
                .map(|m| m + rand_distr::Distribution::sample(&normal, &mut self.rng))
                .collect()
        } else {
            mean.clone()
        };
        let logp = gauss_logp(&action, &mean, self.config.sigma);
        let s2 = softmax(&action);
        (s2, ActionSample { action, mean, logp })
    }

    fn update(&mut self) {
        match self.variant {
            AgentVariant::A2c => {
                let rollout = std::mem::take(&mut self.rollout);
                if rollout.is_empty() {
                    return;
                }
                self.a2c_update(&rollout);
                self.updates_done += 1;
            }
            AgentVariant::Ppo => {
                let rollout = std::mem::take(&mut self.rollout);
                if rollout.is_empty() {
                    return;
                }
                self.ppo_update(&rollout);
                self.updates_done += 1;
            }
            AgentVariant::Sac => {
                if self.replay.len() < self.config.batch_size {
                    return;
                }
                self.sac_update();
                self.updates_done += 1;
            }
            AgentVariant::Baseline => unreachable!("baseline agents are never constructed"),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), AgentError> {
        let mut tensors: Vec<NamedTensor> = Vec::new();
        match &self.nets {
            AgentNets::OnPolicy { ac, .. } => tensors.extend(ac.to_tensors()),
            AgentNets::Sac { nets, .. } => tensors.extend(nets.to_tensors()),
        }
        save_checkpoint(path, &tensors)?;
        Ok(())
    }

    pub fn load(&mut self, path: &std::path::Path) -> Result<(), AgentError> {
        let tensors = load_checkpoint(path)?;
        match &mut self.nets {
            AgentNets::OnPolicy { ac, .. } => ac.load_tensors(&tensors)?,
            AgentNets::Sac { nets, .. } => nets.load_tensors(&tensors)?,
        }
        Ok(())
    }

    fn a2c_update(&mut self, rollout: &[Transition]) {
        let AgentNets::OnPolicy { ac, actor_opt, critic_opt } = &mut self.nets else {
            unreachable!()
        };
        let bootstrap = ac.critic_value(&rollout.last().unwrap().next_state);
        let returns = n_step_returns(
            rollout,
            bootstrap,
            self.config.gamma,
            self.config.standardize_returns,
        );
        let advantages: Vec<f64> = rollout
            .iter()
            .zip(&returns)
            .map(|(tr, ret)| ret - ac.critic_value(&tr.state))
            .collect();
        let batch = A2cBatch {
            states: rollout.iter().map(|t| t.state.clone()).collect(),
            actions: rollout.iter().map(|t| t.action.clone()).collect(),
            returns,
            advantages,
        };
        let (mut actor_grads, mut critic_grads) =
            ac.a2c_grads(&batch, self.config.sigma, self.config.entropy_coef);
        clip_all(&mut actor_grads, &mut critic_grads, self.config.clip_norm);
        ac.step(actor_opt, critic_opt, &actor_grads, &critic_grads, &self.config);
    }

    fn ppo_update(&mut self, rollout: &[Transition]) {
        let AgentNets::OnPolicy { ac, actor_opt, critic_opt } = &mut self.nets else {
            unreachable!()
        };
        let bootstrap = ac.critic_value(&rollout.last().unwrap().next_state);
        let returns = n_step_returns(
            rollout,
            bootstrap,
            self.config.gamma,
            self.config.standardize_returns,
        );
        let advantages: Vec<f64> = rollout
            .iter()
            .zip(&returns)
            .map(|(tr, ret)| ret - ac.critic_value(&tr.state))
            .collect();
        let batch = PpoBatch {
            states: rollout.iter().map(|t| t.state.clone()).collect(),
            actions: rollout.iter().map(|t| t.action.clone()).collect(),
            logp_old: rollout.iter().map(|t| t.logp).collect(),
            advantages,
            value_targets: returns,
        };
        for _ in 0..self.config.ppo_epochs {
            let (mut actor_grads, mut critic_grads) = ac.ppo_grads(
                &batch,
                self.config.sigma,
                self.config.ppo_clip,
                self.config.ppo_value_coef,
                self.config.ppo_entropy_coef,
            );
            clip_all(&mut actor_grads, &mut critic_grads, self.config.clip_norm);
            ac.step(actor_opt, critic_opt, &actor_grads, &critic_grads, &self.config);
        }
    }

    fn sac_update(&mut self) {
        let batch_size = self.config.batch_size;
        let idx = self.replay.sample_indices(batch_size, &mut self.rng);
        let rewards: Vec<f64> = idx.iter().map(|&i| self.replay.get(i).reward).collect();
        let rewards = if self.config.standardize_returns {
            standardize_returns(&rewards)
        } else {
            rewards
        };
        // Fresh reparameterized noise per sampled item.
        let noise: Vec<Vec<f64>> = (0..batch_size)
            .map(|_| {
                (0..self.n)
                    .map(|_| {
                        rand_distr::Distribution::sample(
                            &rand_distr::StandardNormal,
                            &mut self.rng,
                        )
                    })
                    .collect()
            })
            .collect();
        let AgentNets::Sac { nets, actor_opt, q_opt, v_opt } = &mut self.nets else {
            unreachable!()
        };
        let cfg = &self.config;

        // Frozen targets.
        let mut v_items = Vec::with_capacity(batch_size);
        let mut q_items = Vec::with_capacity(batch_size);
        let mut p_items = Vec::with_capacity(batch_size);
        for (k, &i) in idx.iter().enumerate() {
            let tr = self.replay.get(i);
            let mean = nets.actor.forward(&tr.state);
            let fresh: Vec<f64> =
                mean.iter().zip(&noise[k]).map(|(m, xi)| m + cfg.sigma * xi).collect();
            let logp = gauss_logp(&fresh, &mean, cfg.sigma);
            let q_fresh = nets.q_value(&tr.state, &fresh);
            v_items.push(SacVItem {
                state: tr.state.clone(),
                target: q_fresh - cfg.sac_alpha_h * logp,
            });
            let v_next = nets.v_target_value(&tr.next_state);
            q_items.push(SacQItem {
                state: tr.state.clone(),
                action: tr.action.clone(),
                target: rewards[k] + cfg.gamma * v_next,
            });
            p_items.push(SacPolicyItem { state: tr.state.clone(), noise: noise[k].clone() });
        }

        let mut v_grads = nets.v_loss_grads(&v_items);
        clip_grad_norm(&mut v_grads, cfg.clip_norm);
        let mut v_params = nets.v.flatten_params();
        v_opt.step(&mut v_params, &v_grads, cfg.critic_lr);
        nets.v.set_params(&v_params);

        let mut q_grads = nets.q_loss_grads(&q_items);
        clip_grad_norm(&mut q_grads, cfg.clip_norm);
        let mut q_params = nets.q.flatten_params();
        q_opt.step(&mut q_params, &q_grads, cfg.critic_lr);
        nets.q.set_params(&q_params);

        let mut a_grads = nets.policy_loss_grads(&p_items, cfg.sac_alpha_h, cfg.sigma);
        clip_grad_norm(&mut a_grads, cfg.clip_norm);
        let mut a_params = nets.actor.flatten_params();
        actor_opt.step(&mut a_params, &a_grads, cfg.actor_lr);
        nets.actor.set_params(&a_params);

        nets.ema_update_target(cfg.sac_tau);
    }
}

/// Raw action data produced by [`Agent::act`], kept until the next epoch
/// closes the transition.
pub struct ActionSample {
    pub action: Vec<f64>,
    pub mean: Vec<f64>,
    pub logp: f64,
}

/// Backward-accumulated n-step returns with a bootstrap value for the state
/// after the last transition, optionally standardized across the rollout.
fn n_step_returns(
    rollout: &[Transition],
    bootstrap: f64,
    gamma: f64,
    standardize: bool,
) -> Vec<f64> {
    let mut returns = vec![0.0; rollout.len()];
    let mut r = bootstrap;
    for (i, tr) in rollout.iter().enumerate().rev() {
        r = gamma * r + tr.reward;
        returns[i] = r;
    }
    if standardize {
        standardize_returns(&returns)
    } else {
        returns
    }
}

fn clip_all(actor: &mut [f64], critic: &mut [f64], max_norm: f64) {
    // One global norm across both parameter groups.
    let norm: f64 = actor
        .iter()
        .chain(critic.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in actor.iter_mut() {
            *g *= scale;
        }
        for g in critic.iter_mut() {
            *g *= scale;
        }
    }
}

impl EpochHook for Agent {
    fn epoch_step(&mut self, history: &ScoreHistory, reward: f64) -> Vec<f64> {
        let state = encode_state(history, self.config.window, self.n);
        if let Some(p) = self.pending.take() {
            let tr = Transition {
                state: p.state,
                action: p.action,
                mean: p.mean,
                logp: p.logp,
                reward,
                next_state: state.clone(),
            };
            if self.variant != AgentVariant::Sac {
                self.rollout.push(tr.clone());
            }
            self.replay.push(tr);
        }
        self.epochs_seen += 1;
        if self.epochs_seen % self.config.update_period == 0 {
            self.update();
        }
        let (s2, p2) = self.act(&state);
        self.pending =
            Some(Pending { state, action: p2.action, mean: p2.mean, logp: p2.logp });
        s2
    }
}

#[cfg(test)]
mod tests;
