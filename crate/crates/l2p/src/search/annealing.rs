//! Acceptance rule and cooling schedule.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Geometric cooling: `temp *= cooling_factor` every `iters_per_cooling`
/// iterations. Without an explicit initial temperature the engine calibrates
/// one from the deteriorations observed while every heuristic gets its first
/// chance, such that the median worsening move starts at ~50% acceptance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealingSchedule {
    pub initial_temp: Option<f64>,
    pub cooling_factor: f64,
    pub iters_per_cooling: u64,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        Self { initial_temp: None, cooling_factor: 0.95, iters_per_cooling: 500 }
    }
}

/// Improving moves always pass; a worsening (or null) move passes with
/// probability `exp(delta_f / temp)`.
pub fn sa_accept<R: Rng>(delta_f: f64, temp: f64, rng: &mut R) -> bool {
    if delta_f > 0.0 {
        return true;
    }
    rng.gen::<f64>() < (delta_f / temp).exp()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Temperature at which the median observed deterioration is accepted with
/// probability one half. Falls back to the median move magnitude, then 1.
pub fn calibrate_initial_temp(worsening: &[f64], move_magnitudes: &[f64]) -> f64 {
    let pick = |v: &[f64]| -> Option<f64> {
        let mut v: Vec<f64> = v.iter().copied().filter(|x| *x > 0.0).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(median(&v) / std::f64::consts::LN_2)
    };
    pick(worsening).or_else(|| pick(move_magnitudes)).unwrap_or(1.0)
}
