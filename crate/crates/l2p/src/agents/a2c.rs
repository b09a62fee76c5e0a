//! Shared-trunk actor-critic and the advantage actor-critic update.
//!
//! The two networks share every hidden layer except the last one: a common
//! trunk feeds a per-head hidden layer plus linear output. Gradients from
//! both heads accumulate into the trunk, which belongs to the actor
//! parameter group.

use rand::Rng;

use crate::neural::{Activation, AdamaxState, Mlp, MlpGrads, NamedTensor};

use super::{gauss_logp, softmax_entropy_and_grad, AgentConfig};

#[derive(Debug, Clone)]
pub struct SharedActorCritic {
    pub trunk: Mlp,
    pub actor_head: Mlp,
    pub critic_head: Mlp,
}

/// Rollout slice with frozen targets: advantages enter the policy term as
/// constants, returns drive the value regression.
#[derive(Debug, Clone)]
pub struct A2cBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl SharedActorCritic {
    pub fn init<R: Rng>(state_dim: usize, n: usize, hidden: &[usize], rng: &mut R) -> Self {
        assert!(!hidden.is_empty());
        let mut trunk = Mlp::init(&[state_dim, hidden[0]], rng);
        trunk.layers.last_mut().unwrap().activation = Activation::Tanh;
        let mut head_sizes = hidden.to_vec();
        head_sizes.push(n);
        let actor_head = Mlp::init(&head_sizes, rng);
        let mut critic_sizes = hidden.to_vec();
        critic_sizes.push(1);
        let critic_head = Mlp::init(&critic_sizes, rng);
        Self { trunk, actor_head, critic_head }
    }

    pub fn actor_mean(&self, state: &[f64]) -> Vec<f64> {
        self.actor_head.forward(&self.trunk.forward(state))
    }

    pub fn critic_value(&self, state: &[f64]) -> f64 {
        self.critic_head.forward(&self.trunk.forward(state))[0]
    }

    /// The trunk belongs to the actor group.
    pub fn actor_param_count(&self) -> usize {
        self.trunk.num_params() + self.actor_head.num_params()
    }

    pub fn critic_param_count(&self) -> usize {
        self.critic_head.num_params()
    }

    /// Flattened trunk-plus-actor-head parameters.
    pub fn actor_group_params(&self) -> Vec<f64> {
        let mut p = self.trunk.flatten_params();
        p.extend(self.actor_head.flatten_params());
        p
    }

    pub fn set_actor_group_params(&mut self, flat: &[f64]) {
        let nt = self.trunk.num_params();
        self.trunk.set_params(&flat[..nt]);
        self.actor_head.set_params(&flat[nt..]);
    }

    pub fn critic_group_params(&self) -> Vec<f64> {
        self.critic_head.flatten_params()
    }

    pub fn set_critic_group_params(&mut self, flat: &[f64]) {
        self.critic_head.set_params(flat);
    }

    /// Applies flattened parameter-group gradients through the two Adamax
    /// states.
    pub fn step(
        &mut self,
        actor_opt: &mut AdamaxState,
        critic_opt: &mut AdamaxState,
        actor_grads: &[f64],
        critic_grads: &[f64],
        cfg: &AgentConfig,
    ) {
        let mut actor_params = self.actor_group_params();
        actor_opt.step(&mut actor_params, actor_grads, cfg.actor_lr);
        self.set_actor_group_params(&actor_params);

        let mut critic_params = self.critic_group_params();
        critic_opt.step(&mut critic_params, critic_grads, cfg.critic_lr);
        self.set_critic_group_params(&critic_params);
    }

    /// Mean per-item gradients for upstream signals produced by `upstream`,
    /// which receives `(item index, actor mean, critic value)` and returns
    /// `(dL/dmean, dL/dvalue)`.
    pub(super) fn batch_grads<F>(&self, states: &[Vec<f64>], mut upstream: F) -> (Vec<f64>, Vec<f64>)
    where
        F: FnMut(usize, &[f64], f64) -> (Vec<f64>, f64),
    {
        let mut trunk_acc = MlpGrads::zeros_like(&self.trunk);
        let mut actor_acc = MlpGrads::zeros_like(&self.actor_head);
        let mut critic_acc = MlpGrads::zeros_like(&self.critic_head);
        for (i, state) in states.iter().enumerate() {
            let tc = self.trunk.forward_cached(state);
            let ac = self.actor_head.forward_cached(tc.output());
            let cc = self.critic_head.forward_cached(tc.output());
            let (dmu, dv) = upstream(i, ac.output(), cc.output()[0]);
            let (ag, dz_a) = self.actor_head.backward(&ac, &dmu);
            let (cg, dz_c) = self.critic_head.backward(&cc, &[dv]);
            let dz: Vec<f64> = dz_a.iter().zip(&dz_c).map(|(a, c)| a + c).collect();
            let (tg, _) = self.trunk.backward(&tc, &dz);
            trunk_acc.accumulate(&tg);
            actor_acc.accumulate(&ag);
            critic_acc.accumulate(&cg);
        }
        let scale = 1.0 / states.len() as f64;
        trunk_acc.scale(scale);
        actor_acc.scale(scale);
        critic_acc.scale(scale);
        let mut actor_flat = trunk_acc.flatten();
        actor_flat.extend(actor_acc.flatten());
        (actor_flat, critic_acc.flatten())
    }

    /// Scalar surrogate whose parameter gradient equals [`Self::a2c_grads`]:
    /// `mean_i[ -logp(a_i|mu_i) * adv_i - coef * H_i + (ret_i - v_i)^2 ]`
    /// with advantages and returns treated as constants.
    pub fn a2c_loss(&self, batch: &A2cBatch, sigma: f64, entropy_coef: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..batch.states.len() {
            let mu = self.actor_mean(&batch.states[i]);
            let v = self.critic_value(&batch.states[i]);
            let logp = gauss_logp(&batch.actions[i], &mu, sigma);
            let (h, _) = softmax_entropy_and_grad(&mu);
            let err = batch.returns[i] - v;
            total += -logp * batch.advantages[i] - entropy_coef * h + err * err;
        }
        total / batch.states.len() as f64
    }

    /// Flattened `(actor group, critic group)` gradients of [`Self::a2c_loss`].
    pub fn a2c_grads(
        &self,
        batch: &A2cBatch,
        sigma: f64,
        entropy_coef: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let s2 = sigma.max(1e-8).powi(2);
        self.batch_grads(&batch.states, |i, mu, v| {
            let (_, dh) = softmax_entropy_and_grad(mu);
            let dmu: Vec<f64> = mu
                .iter()
                .zip(&batch.actions[i])
                .zip(&dh)
                .map(|((m, a), g)| {
                    -batch.advantages[i] * (a - m) / s2 - entropy_coef * g
                })
                .collect();
            let dv = -2.0 * (batch.returns[i] - v);
            (dmu, dv)
        })
    }

    pub fn to_tensors(&self) -> Vec<NamedTensor> {
        let mut out = self.trunk.to_tensors("trunk");
        out.extend(self.actor_head.to_tensors("actor"));
        out.extend(self.critic_head.to_tensors("critic"));
        out
    }

    pub fn load_tensors(&mut self, tensors: &[NamedTensor]) -> std::io::Result<()> {
        self.trunk.load_tensors("trunk", tensors)?;
        self.actor_head.load_tensors("actor", tensors)?;
        self.critic_head.load_tensors("critic", tensors)
    }
}
