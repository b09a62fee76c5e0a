//! Soft actor-critic networks: a Gaussian policy, a soft Q function over
//! state-action pairs, a soft state-value function and its slow-moving
//! target copy.

use rand::Rng;

use crate::neural::{Mlp, MlpGrads, NamedTensor};

use super::gauss_logp;

#[derive(Debug, Clone)]
pub struct SacNets {
    pub actor: Mlp,
    /// Input is the concatenated `[state, action]`.
    pub q: Mlp,
    pub v: Mlp,
    pub v_target: Mlp,
}

/// Value regression item with a frozen target `Q(s, a~) - alpha_H log pi`.
#[derive(Debug, Clone)]
pub struct SacVItem {
    pub state: Vec<f64>,
    pub target: f64,
}

/// Bellman regression item with a frozen target `r + gamma * V_target(s')`.
#[derive(Debug, Clone)]
pub struct SacQItem {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub target: f64,
}

/// Reparameterized policy item: the fresh action is `mu(s) + sigma * noise`
/// with the noise held fixed.
#[derive(Debug, Clone)]
pub struct SacPolicyItem {
    pub state: Vec<f64>,
    pub noise: Vec<f64>,
}

impl SacNets {
    pub fn init<R: Rng>(state_dim: usize, n: usize, hidden: &[usize], rng: &mut R) -> Self {
        let sizes = |input: usize, out: usize| -> Vec<usize> {
            let mut v = vec![input];
            v.extend_from_slice(hidden);
            v.push(out);
            v
        };
        let actor = Mlp::init(&sizes(state_dim, n), rng);
        let q = Mlp::init(&sizes(state_dim + n, 1), rng);
        let v = Mlp::init(&sizes(state_dim, 1), rng);
        let v_target = v.clone();
        Self { actor, q, v, v_target }
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> f64 {
        let mut input = state.to_vec();
        input.extend_from_slice(action);
        self.q.forward(&input)[0]
    }

    pub fn v_value(&self, state: &[f64]) -> f64 {
        self.v.forward(state)[0]
    }

    pub fn v_target_value(&self, state: &[f64]) -> f64 {
        self.v_target.forward(state)[0]
    }

    /// `mean_i 0.5 (V(s_i) - target_i)^2`
    pub fn v_loss(&self, items: &[SacVItem]) -> f64 {
        items
            .iter()
            .map(|it| {
                let err = self.v_value(&it.state) - it.target;
                0.5 * err * err
            })
            .sum::<f64>()
            / items.len() as f64
    }

    pub fn v_loss_grads(&self, items: &[SacVItem]) -> Vec<f64> {
        let mut acc = MlpGrads::zeros_like(&self.v);
        for it in items {
            let cache = self.v.forward_cached(&it.state);
            let err = cache.output()[0] - it.target;
            let (g, _) = self.v.backward(&cache, &[err]);
            acc.accumulate(&g);
        }
        acc.scale(1.0 / items.len() as f64);
        acc.flatten()
    }

    /// `mean_i 0.5 (Q(s_i, a_i) - target_i)^2`
    pub fn q_loss(&self, items: &[SacQItem]) -> f64 {
        items
            .iter()
            .map(|it| {
                let err = self.q_value(&it.state, &it.action) - it.target;
                0.5 * err * err
            })
            .sum::<f64>()
            / items.len() as f64
    }

    pub fn q_loss_grads(&self, items: &[SacQItem]) -> Vec<f64> {
        let mut acc = MlpGrads::zeros_like(&self.q);
        for it in items {
            let mut input = it.state.clone();
            input.extend_from_slice(&it.action);
            let cache = self.q.forward_cached(&input);
            let err = cache.output()[0] - it.target;
            let (g, _) = self.q.backward(&cache, &[err]);
            acc.accumulate(&g);
        }
        acc.scale(1.0 / items.len() as f64);
        acc.flatten()
    }

    /// `mean_i [alpha_H log pi(a~|s_i) - Q(s_i, a~)]` with
    /// `a~ = mu(s_i) + sigma * noise_i`. With the scale fixed, the log term
    /// is constant in the actor parameters; the gradient flows through the
    /// Q network's action input.
    pub fn policy_loss(&self, items: &[SacPolicyItem], alpha_h: f64, sigma: f64) -> f64 {
        items
            .iter()
            .map(|it| {
                let mu = self.actor.forward(&it.state);
                let fresh: Vec<f64> =
                    mu.iter().zip(&it.noise).map(|(m, xi)| m + sigma * xi).collect();
                alpha_h * gauss_logp(&fresh, &mu, sigma) - self.q_value(&it.state, &fresh)
            })
            .sum::<f64>()
            / items.len() as f64
    }

    pub fn policy_loss_grads(&self, items: &[SacPolicyItem], _alpha_h: f64, sigma: f64) -> Vec<f64> {
        let n = self.actor.output_size();
        let mut acc = MlpGrads::zeros_like(&self.actor);
        for it in items {
            let acache = self.actor.forward_cached(&it.state);
            let mu = acache.output();
            let fresh: Vec<f64> =
                mu.iter().zip(&it.noise).map(|(m, xi)| m + sigma * xi).collect();
            let mut input = it.state.clone();
            input.extend_from_slice(&fresh);
            let qcache = self.q.forward_cached(&input);
            let (_, dinput) = self.q.backward(&qcache, &[1.0]);
            // d(-Q)/dmu: the action occupies the input tail.
            let dmu: Vec<f64> = dinput[dinput.len() - n..].iter().map(|g| -g).collect();
            let (g, _) = self.actor.backward(&acache, &dmu);
            acc.accumulate(&g);
        }
        acc.scale(1.0 / items.len() as f64);
        acc.flatten()
    }

    /// `v_target <- tau * v + (1 - tau) * v_target`, elementwise.
    pub fn ema_update_target(&mut self, tau: f64) {
        for (lt, l) in self.v_target.layers.iter_mut().zip(&self.v.layers) {
            for (wt, w) in lt.weights.iter_mut().zip(&l.weights) {
                *wt = tau * w + (1.0 - tau) * *wt;
            }
            for (bt, b) in lt.biases.iter_mut().zip(&l.biases) {
                *bt = tau * b + (1.0 - tau) * *bt;
            }
        }
    }

    pub fn to_tensors(&self) -> Vec<NamedTensor> {
        let mut out = self.actor.to_tensors("actor");
        out.extend(self.q.to_tensors("q"));
        out.extend(self.v.to_tensors("v"));
        out.extend(self.v_target.to_tensors("v_target"));
        out
    }

    pub fn load_tensors(&mut self, tensors: &[NamedTensor]) -> std::io::Result<()> {
        self.actor.load_tensors("actor", tensors)?;
        self.q.load_tensors("q", tensors)?;
        self.v.load_tensors("v", tensors)?;
        self.v_target.load_tensors("v_target", tensors)
    }
}
