//! Bounded FIFO experience storage.

use std::collections::VecDeque;

use rand::Rng;

/// One epoch transition. `mean` and `logp` freeze the policy at collection
/// time for ratio-based updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub mean: Vec<f64>,
    pub logp: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { items: VecDeque::with_capacity(capacity.min(4096)), capacity: capacity.max(1) }
    }

    pub fn push(&mut self, tr: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(tr);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Uniform sample with replacement.
    pub fn sample_indices<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<usize> {
        (0..count).map(|_| rng.gen_range(0..self.items.len())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(tag: f64) -> Transition {
        Transition {
            state: vec![tag],
            action: vec![tag],
            mean: vec![tag],
            logp: 0.0,
            reward: tag,
            next_state: vec![tag],
        }
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(tr(i as f64));
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.get(0).reward, 2.0);
        assert_eq!(buf.get(2).reward, 4.0);
    }
}
