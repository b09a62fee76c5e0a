//! Clipped-surrogate policy optimization over the shared actor-critic.

use super::{gauss_logp, softmax_entropy_and_grad, SharedActorCritic};

/// Rollout collected under a policy snapshot; `logp_old` are the densities
/// of the stored actions at collection time, so the ratio starts at one.
#[derive(Debug, Clone)]
pub struct PpoBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub logp_old: Vec<f64>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
}

/// `min(r * adv, clip(r, 1-eps, 1+eps) * adv)` — the pessimistic surrogate.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    unclipped.min(clipped)
}

impl SharedActorCritic {
    /// Scalar objective (as a minimized loss):
    /// `mean_i[ -surrogate_i + p1 * (v_i - target_i)^2 - p2 * H_i ]`.
    pub fn ppo_loss(&self, batch: &PpoBatch, sigma: f64, eps: f64, p1: f64, p2: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..batch.states.len() {
            let mu = self.actor_mean(&batch.states[i]);
            let v = self.critic_value(&batch.states[i]);
            let ratio = (gauss_logp(&batch.actions[i], &mu, sigma) - batch.logp_old[i]).exp();
            let (h, _) = softmax_entropy_and_grad(&mu);
            let err = v - batch.value_targets[i];
            total += -clipped_surrogate(ratio, batch.advantages[i], eps) + p1 * err * err
                - p2 * h;
        }
        total / batch.states.len() as f64
    }

    /// Flattened `(actor group, critic group)` gradients of [`Self::ppo_loss`].
    pub fn ppo_grads(
        &self,
        batch: &PpoBatch,
        sigma: f64,
        eps: f64,
        p1: f64,
        p2: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let s2 = sigma.max(1e-8).powi(2);
        self.batch_grads(&batch.states, |i, mu, v| {
            let adv = batch.advantages[i];
            let ratio = (gauss_logp(&batch.actions[i], &mu.to_vec(), sigma)
                - batch.logp_old[i])
                .exp();
            let unclipped = ratio * adv;
            let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
            // The min picks the unclipped branch on ties; outside the trust
            // region the clipped branch is flat.
            let through = if unclipped <= clipped { adv * ratio } else { 0.0 };
            let (_, dh) = softmax_entropy_and_grad(mu);
            let dmu: Vec<f64> = mu
                .iter()
                .zip(&batch.actions[i])
                .zip(&dh)
                .map(|((m, a), g)| -through * (a - m) / s2 - p2 * g)
                .collect();
            let dv = p1 * 2.0 * (v - batch.value_targets[i]);
            (dmu, dv)
        })
    }
}
