//! Experience tuples and the bounded FIFO replay memory.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

/// One transition: state, action taken, reward received, successor state.
///
/// States are shared pointers because consecutive experiences of one episode
/// share the middle state.
#[derive(Debug)]
pub struct Experience<S> {
    pub state: Arc<S>,
    pub action: usize,
    pub reward: f32,
    pub next_state: Arc<S>,
}

impl<S> Clone for Experience<S> {
    fn clone(&self) -> Self {
        Experience {
            state: Arc::clone(&self.state),
            action: self.action,
            reward: self.reward,
            next_state: Arc::clone(&self.next_state),
        }
    }
}

/// Ring buffer of experiences with an eviction bound and a training
/// readiness threshold: the oldest entry is dropped once `max_size` is
/// reached, and sampling is only allowed at `min_size` or above.
#[derive(Debug)]
pub struct ReplayMemory<S> {
    buf: VecDeque<Experience<S>>,
    max_size: usize,
    min_size: usize,
}

impl<S> ReplayMemory<S> {
    pub fn new(max_size: usize, min_size: usize) -> ReplayMemory<S> {
        assert!(max_size >= 1 && min_size >= 1 && min_size <= max_size);
        ReplayMemory {
            buf: VecDeque::with_capacity(max_size.min(1 << 20)),
            max_size,
            min_size,
        }
    }

    pub fn push(&mut self, exp: Experience<S>) {
        if self.buf.len() == self.max_size {
            self.buf.pop_front();
        }
        self.buf.push_back(exp);
        debug_assert!(self.buf.len() <= self.max_size);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn min_size(&self) -> usize {
        self.min_size
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    /// True once enough experience has been collected to train on.
    pub fn is_ready(&self) -> bool {
        self.buf.len() >= self.min_size
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }

    /// Uniform sample of `n` experiences, with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<&Experience<S>> {
        assert!(!self.buf.is_empty());
        (0..n)
            .map(|_| &self.buf[rng.random_range(0..self.buf.len())])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience<S>> {
        self.buf.iter()
    }
}
