//! Per-heuristic score bookkeeping: improvement and damage rates, the
//! adaptive score, the blended final score and tabu status.

use rand::Rng;

/// `pi1 + delta_f / time` for improving moves, unchanged otherwise.
pub fn improvement_rate(pi1: f64, delta_f: f64, time_s: f64) -> f64 {
    if delta_f > 0.0 {
        pi1 + delta_f / time_s
    } else {
        pi1
    }
}

/// `pi2 + 1 / (|delta_f| * time)` for worsening moves, unchanged otherwise.
/// The magnitude keeps the accumulator non-negative.
pub fn damage_rate(pi2: f64, delta_f: f64, time_s: f64) -> f64 {
    if delta_f < 0.0 {
        pi2 + 1.0 / (delta_f.abs() * time_s)
    } else {
        pi2
    }
}

/// Adaptive score update: heuristics unused this epoch keep their final
/// score, the rest blend it with the β-weighted mix of the two rates.
pub fn adaptive_score(sf: f64, pi1: f64, pi2: f64, eta: u32, alpha: f64, beta: f64) -> f64 {
    if eta == 0 {
        sf
    } else {
        (1.0 - alpha) * sf + alpha * (beta * pi1 + (1.0 - beta) * pi2) / eta as f64
    }
}

/// Final score: the agent contributes `lambda_rl` of the mass. At
/// `lambda_rl = 0` the result is `s1` exactly, bit for bit.
pub fn final_score(s1: f64, s2: f64, lambda_rl: f64) -> f64 {
    if lambda_rl == 0.0 {
        s1
    } else {
        (1.0 - lambda_rl) * s1 + lambda_rl * s2
    }
}

/// Divides by the sum; an all-zero vector stays zero (selection then falls
/// back to uniform).
pub fn normalized(v: &[f64]) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        v.iter().map(|x| x / sum).collect()
    } else {
        v.to_vec()
    }
}

#[derive(Debug, Clone)]
pub struct Scoreboard {
    pub pi1: Vec<f64>,
    pub pi2: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub sf: Vec<f64>,
    /// Selections of each heuristic in the current epoch.
    pub eta: Vec<u32>,
    /// Remaining exclusion length per heuristic; zero means selectable.
    pub tabu_remaining: Vec<u32>,
    /// β stored in tenths so the 0.1 lattice is exact.
    pub beta_tenths: u8,
}

impl Scoreboard {
    pub fn new(n: usize) -> Self {
        let uniform = vec![1.0 / n as f64; n];
        Self {
            pi1: vec![0.0; n],
            pi2: vec![0.0; n],
            s1: uniform.clone(),
            s2: vec![0.0; n],
            sf: uniform,
            eta: vec![0; n],
            tabu_remaining: vec![0; n],
            beta_tenths: 5,
        }
    }

    pub fn len(&self) -> usize {
        self.sf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sf.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta_tenths as f64 / 10.0
    }

    pub fn record_measures(&mut self, h: usize, delta_f: f64, time_s: f64) {
        self.pi1[h] = improvement_rate(self.pi1[h], delta_f, time_s);
        self.pi2[h] = damage_rate(self.pi2[h], delta_f, time_s);
    }

    /// Samples a heuristic with probability proportional to its final score
    /// among non-tabu entries; zero total mass falls back to uniform. When
    /// every heuristic is tabu the whole list is revoked first.
    pub fn select<R: Rng>(&mut self, rng: &mut R) -> usize {
        if self.tabu_remaining.iter().all(|&t| t > 0) {
            self.tabu_remaining.fill(0);
        }
        let weights: Vec<f64> = self
            .sf
            .iter()
            .zip(&self.tabu_remaining)
            .map(|(&w, &t)| if t == 0 { w } else { 0.0 })
            .collect();
        if let Some(h) = crate::heuristics::weighted_choice(&weights, rng) {
            return h;
        }
        // Degenerate mass: uniform over the non-tabu set.
        let open: Vec<usize> =
            (0..self.len()).filter(|&i| self.tabu_remaining[i] == 0).collect();
        open[rng.gen_range(0..open.len())]
    }

    /// Ages every active tabu counter by one iteration.
    pub fn age_tabu(&mut self) {
        for t in self.tabu_remaining.iter_mut() {
            *t = t.saturating_sub(1);
        }
    }

    pub fn make_tabu<R: Rng>(&mut self, h: usize, rng: &mut R, min: u32, max: u32) {
        self.tabu_remaining[h] = rng.gen_range(min..=max);
    }

    /// First half of the epoch synchronization: β moves on its 0.1 lattice,
    /// the rate accumulators are normalized, and the adaptive score is
    /// refreshed from the previous final score. Returns the normalized
    /// snapshot an agent observes.
    pub fn begin_epoch(&mut self, alpha: f64, new_best: bool) -> EpochScores {
        self.beta_tenths = if new_best { 10 } else { self.beta_tenths.saturating_sub(1) };
        let beta = self.beta();
        self.pi1 = normalized(&self.pi1);
        self.pi2 = normalized(&self.pi2);
        self.s1 = (0..self.len())
            .map(|h| adaptive_score(self.sf[h], self.pi1[h], self.pi2[h], self.eta[h], alpha, beta))
            .collect();
        EpochScores { pi1: self.pi1.clone(), pi2: self.pi2.clone(), s1: normalized(&self.s1) }
    }

    /// Second half: blend in the agent score, renormalize the final score
    /// (degenerate mass falls back to uniform so selection always has a
    /// probability vector), and reset the per-epoch accumulators and all
    /// tabu status.
    pub fn finish_epoch(&mut self, lambda_rl: f64, s2: Option<&[f64]>) {
        if let Some(s2) = s2 {
            self.s2.copy_from_slice(s2);
        }
        let sf_raw: Vec<f64> =
            (0..self.len()).map(|h| final_score(self.s1[h], self.s2[h], lambda_rl)).collect();
        let sf = normalized(&sf_raw);
        let total: f64 = sf.iter().sum();
        self.sf = if total > 0.0 { sf } else { vec![1.0 / self.len() as f64; self.len()] };
        self.pi1.fill(0.0);
        self.pi2.fill(0.0);
        self.eta.fill(0);
        self.tabu_remaining.fill(0);
    }
}

/// Normalized per-epoch score snapshot, in the shape agents consume.
#[derive(Debug, Clone)]
pub struct EpochScores {
    pub pi1: Vec<f64>,
    pub pi2: Vec<f64>,
    pub s1: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn measure_updates_match_the_definitions() {
        assert_eq!(improvement_rate(0.0, 10.0, 2.0), 5.0);
        assert_eq!(improvement_rate(1.0, -3.0, 2.0), 1.0);
        assert_eq!(damage_rate(0.0, -4.0, 0.5), 0.5);
        assert_eq!(damage_rate(0.25, 4.0, 0.5), 0.25);
        // No-op move leaves both untouched.
        assert_eq!(improvement_rate(0.7, 0.0, 1.0), 0.7);
        assert_eq!(damage_rate(0.7, 0.0, 1.0), 0.7);
    }

    #[test]
    fn adaptive_score_identities() {
        // Unused heuristics keep their final score.
        assert_eq!(adaptive_score(0.4, 9.9, 9.9, 0, 0.3, 0.5), 0.4);
        // alpha=1, beta=1, eta=2, pi1=6 -> 3 regardless of pi2.
        assert_eq!(adaptive_score(0.4, 6.0, 123.0, 2, 1.0, 1.0), 3.0);
    }

    #[test]
    fn zero_lambda_is_bit_exact_pass_through() {
        let s1 = 0.123456789123;
        assert_eq!(final_score(s1, 0.999, 0.0), s1);
        assert_eq!(final_score(1.0, 0.0, 0.5), 0.5);
    }

    #[test]
    fn tabu_exclusion_lasts_exactly_gamma_selections() {
        let mut sb = Scoreboard::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        sb.make_tabu(0, &mut rng, 3, 3);
        let mut excluded = 0;
        loop {
            let h = sb.select(&mut rng);
            if sb.tabu_remaining[0] > 0 {
                assert_eq!(h, 1);
                excluded += 1;
            } else {
                break;
            }
            sb.age_tabu();
        }
        assert_eq!(excluded, 3);
    }

    #[test]
    fn all_tabu_revokes_immediately() {
        let mut sb = Scoreboard::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        sb.make_tabu(0, &mut rng, 5, 5);
        sb.make_tabu(1, &mut rng, 5, 5);
        let _ = sb.select(&mut rng);
        assert!(sb.tabu_remaining.iter().all(|&t| t == 0));
    }

    #[test]
    fn tabu_heuristics_have_zero_probability() {
        let mut sb = Scoreboard::new(2);
        sb.sf = vec![0.25, 0.75];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        sb.make_tabu(1, &mut rng, 100, 100);
        for _ in 0..50 {
            assert_eq!(sb.select(&mut rng), 0);
        }
    }

    #[test]
    fn epoch_update_normalizes_and_resets() {
        let mut sb = Scoreboard::new(3);
        sb.pi1 = vec![2.0, 0.0, 2.0];
        sb.pi2 = vec![0.0, 1.0, 0.0];
        sb.eta = vec![1, 1, 0];
        let snap = sb.begin_epoch(0.3, false);
        assert!((snap.pi1.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((snap.s1.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        sb.finish_epoch(0.0, None);
        assert_eq!(sb.beta_tenths, 4);
        let sum: f64 = sb.sf.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(sb.sf.iter().all(|&x| x >= 0.0));
        assert!(sb.pi1.iter().all(|&x| x == 0.0));
        assert!(sb.eta.iter().all(|&x| x == 0));
        // New best resets beta to 1.
        sb.begin_epoch(0.3, true);
        sb.finish_epoch(0.0, None);
        assert_eq!(sb.beta_tenths, 10);
    }
}
