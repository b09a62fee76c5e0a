//! Adamax: Adam with the infinity norm in place of the second moment.

/// Per-parameter first moment and infinity-norm accumulator over a flat
/// parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamaxState {
    pub m: Vec<f64>,
    pub u: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
}

const U_FLOOR: f64 = 1e-12;

impl AdamaxState {
    pub fn new(num_params: usize) -> Self {
        Self { m: vec![0.0; num_params], u: vec![0.0; num_params], t: 0, beta1: 0.9, beta2: 0.999 }
    }

    /// One update: `m ← β1·m + (1−β1)·g`, `u ← max(β2·u, |g|)`,
    /// `θ ← θ − (lr / (1 − β1^t)) · m / u`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "parameter count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.t += 1;
        let correction = 1.0 - self.beta1.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.u[i] = (self.beta2 * self.u[i]).max(g.abs());
            params[i] -= lr / correction * self.m[i] / self.u[i].max(U_FLOOR);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_on_fresh_state_is_a_no_op() {
        let mut st = AdamaxState::new(3);
        let mut params = vec![1.0, -2.0, 0.5];
        st.step(&mut params, &[0.0; 3], 0.1);
        assert_eq!(params, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut st = AdamaxState::new(3);
        let mut params = vec![0.0; 3];
        st.step(&mut params, &[2.0, -0.01, 5.0], 0.1);
        assert!((params[0] - (-0.1)).abs() < 1e-12);
        assert!((params[1] - 0.1).abs() < 1e-12);
        assert!((params[2] - (-0.1)).abs() < 1e-12);
    }

    #[test]
    fn ten_step_trace_matches_reference() {
        // Independent scalar transcription of the update rule.
        let (b1, b2, lr) = (0.9, 0.999, 0.05);
        let grads = [0.3, -1.2, 0.0, 0.7, -0.05, 2.0, 0.01, -0.3, 0.9, -0.9];
        let mut theta_ref = 0.25;
        let (mut m, mut u) = (0.0f64, 0.0f64);
        for (k, g) in grads.iter().enumerate() {
            m = b1 * m + (1.0 - b1) * g;
            u = (b2 * u).max(g.abs());
            theta_ref -= lr / (1.0 - b1.powi(k as i32 + 1)) * m / u.max(1e-12);
        }

        let mut st = AdamaxState::new(1);
        let mut params = vec![0.25];
        for g in grads {
            st.step(&mut params, &[g], lr);
        }
        assert!((params[0] - theta_ref).abs() < 1e-12, "{} vs {theta_ref}", params[0]);
    }
}
