//! The two replay memories: a FIFO circular buffer for reinforcement
//! learning experience and a reservoir-sampled buffer (Vitter's Algorithm R)
//! for supervised learning experience.

use std::collections::VecDeque;

use rand::Rng;

use crate::games::{ActionId, InfoState, PlayerId};

/// Bounded FIFO: once full, each push evicts the oldest item. Iteration
/// order is insertion order of the surviving items.
#[derive(Debug, Clone)]
pub struct CircularBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> CircularBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        CircularBuffer { items: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
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

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}

/// Uniform sample of everything ever pushed, via Vitter's Algorithm R:
/// the n-th item (1-based) replaces a uniformly random slot with
/// probability `capacity / n` once the buffer is full.
#[derive(Debug, Clone)]
pub struct ReservoirBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    seen: u64,
}

impl<T> ReservoirBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        ReservoirBuffer { items: Vec::with_capacity(capacity), capacity, seen: 0 }
    }

    pub fn push(&mut self, item: T, rng: &mut impl Rng) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            let j = rng.gen_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.items[j as usize] = item;
            }
        }
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

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}

/// Buffers that support uniform minibatch sampling with replacement.
pub trait SampleBuffer<T: Clone> {
    fn sample_len(&self) -> usize;
    fn sample_get(&self, idx: usize) -> &T;

    /// `k` items drawn uniformly with replacement, or `None` while empty
    /// (callers skip the training step).
    fn sample_minibatch(&self, k: usize, rng: &mut impl Rng) -> Option<Vec<T>> {
        let n = self.sample_len();
        if n == 0 {
            return None;
        }
        Some((0..k).map(|_| self.sample_get(rng.gen_range(0..n)).clone()).collect())
    }
}

impl<T: Clone> SampleBuffer<T> for CircularBuffer<T> {
    fn sample_len(&self) -> usize {
        self.items.len()
    }

    fn sample_get(&self, idx: usize) -> &T {
        &self.items[idx]
    }
}

impl<T: Clone> SampleBuffer<T> for ReservoirBuffer<T> {
    fn sample_len(&self) -> usize {
        self.items.len()
    }

    fn sample_get(&self, idx: usize) -> &T {
        &self.items[idx]
    }
}

/// One Q-learning transition. `next_obs`/`next_legal` are empty at
/// terminals, where the TD target is the bare reward.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: InfoState,
    pub action: ActionId,
    pub reward: f64,
    pub next_obs: InfoState,
    pub next_legal: Vec<ActionId>,
    pub terminal: bool,
}

/// One search-improved policy sample with the episode outcome, as stored by
/// the MCTS-based learner.
#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    pub obs: InfoState,
    pub policy: Vec<f64>,
    pub outcome: f64,
}

/// Supervised experience: the action (or search policy) taken while playing
/// the best-response policy.
#[derive(Debug, Clone)]
pub struct BestResponseSample {
    pub player: PlayerId,
    pub obs: InfoState,
    pub action: ActionId,
}

/// `(s, π)` supervised target for the MCTS-based learner.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub obs: InfoState,
    pub policy: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn circular_buffer_evicts_fifo() {
        let mut buf = CircularBuffer::new(3);
        for i in 1..=5 {
            buf.push(i);
        }
        assert_eq!(buf.iter().copied().collect::<Vec<_>>(), vec![3, 4, 5]);
        assert_eq!(buf.len(), 3);
    }

    #[test]
    fn reservoir_keeps_everything_until_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = ReservoirBuffer::new(10);
        for i in 0..7 {
            buf.push(i, &mut rng);
        }
        assert_eq!(buf.len(), 7);
        let mut items: Vec<i32> = buf.iter().copied().collect();
        items.sort_unstable();
        assert_eq!(items, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn reservoir_retention_is_uniform() {
        // Monte Carlo check of Algorithm R: capacity 2, four pushes, each
        // item retained with probability 1/2.
        let trials = 100_000;
        let mut kept = [0u32; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..trials {
            let mut buf = ReservoirBuffer::new(2);
            for i in 0..4 {
                buf.push(i, &mut rng);
            }
            for &i in buf.iter() {
                kept[i as usize] += 1;
            }
        }
        for count in kept {
            let freq = f64::from(count) / f64::from(trials);
            assert!((freq - 0.5).abs() < 0.01, "retention frequency {freq}");
        }
    }

    #[test]
    fn minibatch_of_singleton_repeats_it() {
        let mut buf = CircularBuffer::new(4);
        buf.push(7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(buf.sample_minibatch(3, &mut rng).unwrap(), vec![7, 7, 7]);
    }

    #[test]
    fn empty_buffer_signals_not_ready() {
        let buf: CircularBuffer<u8> = CircularBuffer::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(buf.sample_minibatch(2, &mut rng).is_none());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut buf = ReservoirBuffer::new(8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..8 {
            buf.push(i, &mut rng);
        }
        let a = buf.sample_minibatch(5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = buf.sample_minibatch(5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn minibatch_sampling_is_uniform() {
        let mut buf = CircularBuffer::new(10);
        for i in 0..10 {
            buf.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts: HashMap<i32, u32> = HashMap::new();
        let draws = 1_000_000;
        for item in buf.sample_minibatch(draws, &mut rng).unwrap() {
            *counts.entry(item).or_default() += 1;
        }
        for i in 0..10 {
            let freq = f64::from(counts[&i]) / f64::from(draws as u32);
            assert!((freq - 0.1).abs() < 0.005, "item {i} frequency {freq}");
        }
    }
}
