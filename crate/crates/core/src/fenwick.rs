//! Fenwick (binary indexed) tree over f64 weights, 1-indexed positions.
//!
//! Capacity is kept at a power of two so that `lower_bound` can descend the
//! implicit tree one bit at a time instead of binary-searching prefix sums.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub(crate) struct Fenwick {
    // tree[0] is unused; tree[i] covers the range (i - lsb(i), i].
    tree: Vec<f64>,
}

impl Fenwick {
    /// Capacity is rounded up to the next power of two, minimum 1.
    pub fn with_capacity(capacity: usize) -> Self {
        let cap = capacity.max(1).next_power_of_two();
        Fenwick {
            tree: vec![0.0; cap + 1],
        }
    }

    pub fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    /// Adds `delta` at `pos` (1-indexed, `pos <= capacity`).
    pub fn add(&mut self, pos: usize, delta: f64) {
        debug_assert!(pos >= 1 && pos <= self.capacity());
        let mut i = pos;
        while i <= self.capacity() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of weights at positions `1..=pos`; `pos` may exceed capacity.
    pub fn prefix_sum(&self, pos: usize) -> f64 {
        let mut i = pos.min(self.capacity());
        let mut acc = 0.0;
        while i > 0 {
            acc += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        acc
    }

    /// Smallest position whose prefix sum exceeds `w`, i.e. the position `p`
    /// with `prefix_sum(p - 1) <= w < prefix_sum(p)`. Returns `capacity + 1`
    /// when no prefix exceeds `w`.
    pub fn lower_bound(&self, w: f64) -> usize {
        let cap = self.capacity();
        let mut pos = 0usize;
        let mut rem = w;
        let mut step = cap;
        while step > 0 {
            let next = pos + step;
            if next <= cap && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        pos + 1
    }

    /// Replaces the contents with the given `(pos, weight)` pairs, growing to
    /// `capacity` (rounded up to a power of two). O(capacity).
    pub fn rebuild(&mut self, capacity: usize, weights: impl Iterator<Item = (usize, f64)>) {
        let cap = capacity.max(1).next_power_of_two();
        self.tree.clear();
        self.tree.resize(cap + 1, 0.0);
        for (pos, w) in weights {
            debug_assert!(pos >= 1 && pos <= cap);
            self.tree[pos] += w;
        }
        // One linear pass turns per-position values into Fenwick range sums.
        for i in 1..=cap {
            let parent = i + (i & i.wrapping_neg());
            if parent <= cap {
                let v = self.tree[i];
                self.tree[parent] += v;
            }
        }
    }
}
