//! Degree-class bookkeeping for weight-proportional sampling.
//!
//! Vertices are grouped into classes by raw degree `k`. The index maintains,
//! per class, the count `N(k)` and the member list, plus the Fenwick-backed
//! prefix weights `D(k) = sum_{j <= k} N(j) * j^alpha` needed to sample a
//! class with probability proportional to its total weight in O(log max
//! degree). Degrees only ever grow, so classes are never compacted.
//!
//! The running total weight `D` is maintained incrementally and recomputed
//! exactly every `2^20` updates to cap float drift.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::fenwick::Fenwick;

pub type VertexId = u32;

const REBUILD_INTERVAL: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IndexError {
    #[error("vertex {0} is already present")]
    DuplicateVertex(VertexId),
    #[error("vertex {0} is not present")]
    UnknownVertex(VertexId),
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error("degree class {0} is empty")]
    EmptyClass(usize),
    #[error("weight {0} outside [0, total weight {1})")]
    WeightOutOfRange(f64, f64),
    #[error("malformed snapshot line {0}: {1}")]
    BadSnapshot(usize, String),
}

#[derive(Debug, Clone)]
pub struct DegreeClassIndex {
    alpha: f64,
    tree: Fenwick,
    /// `class_counts[k]` = number of vertices of degree `k`; index 0 unused.
    class_counts: Vec<u32>,
    /// Member list per class; positions tracked in `vertex_slot`.
    classes: Vec<Vec<VertexId>>,
    /// `pow_cache[k] = k^alpha`, filled on first use of degree `k`.
    pow_cache: Vec<f64>,
    /// Degree by vertex id; 0 marks an absent id.
    vertex_degree: Vec<u32>,
    /// Position of each vertex inside `classes[degree]`.
    vertex_slot: Vec<u32>,
    total_weight: f64,
    degree_sum: u64,
    vertex_count: usize,
    max_degree: usize,
    count_at_max: u64,
    updates: u64,
}

impl DegreeClassIndex {
    pub fn new(alpha: f64) -> Self {
        DegreeClassIndex {
            alpha,
            tree: Fenwick::with_capacity(1),
            class_counts: vec![0; 2],
            classes: vec![Vec::new(), Vec::new()],
            pow_cache: vec![0.0; 2],
            vertex_degree: Vec::new(),
            vertex_slot: Vec::new(),
            total_weight: 0.0,
            degree_sum: 0,
            vertex_count: 0,
            max_degree: 0,
            count_at_max: 0,
            updates: 0,
        }
    }

    /// Rebuilds an index from `(degree, count)` pairs, assigning fresh dense
    /// vertex ids. Same-degree vertices are exchangeable, so a restarted run
    /// is statistically indistinguishable even though ids differ.
    pub fn from_class_counts(
        alpha: f64,
        pairs: impl IntoIterator<Item = (usize, u64)>,
    ) -> Result<Self, IndexError> {
        let mut ix = DegreeClassIndex::new(alpha);
        let mut next_id: VertexId = 0;
        for (degree, count) in pairs {
            for _ in 0..count {
                ix.add_vertex(next_id, degree)?;
                next_id += 1;
            }
        }
        Ok(ix)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Sum of all degrees; equals twice the edge count of the graph.
    pub fn degree_sum(&self) -> u64 {
        self.degree_sum
    }

    /// Running total weight `D = sum_k N(k) * k^alpha`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of vertices sitting at the current maximum degree.
    pub fn count_at_max(&self) -> u64 {
        self.count_at_max
    }

    pub fn class_count(&self, degree: usize) -> u64 {
        if degree < self.class_counts.len() {
            self.class_counts[degree] as u64
        } else {
            0
        }
    }

    pub fn degree_of(&self, id: VertexId) -> Option<usize> {
        match self.vertex_degree.get(id as usize) {
            Some(&d) if d > 0 => Some(d as usize),
            _ => None,
        }
    }

    /// Occupied `(degree, count)` pairs in ascending degree order.
    pub fn class_counts(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.class_counts
            .iter()
            .enumerate()
            .take(self.max_degree + 1)
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k, c as u64))
    }

    /// `k^alpha` as used internally for class weights.
    pub fn degree_weight(&self, degree: usize) -> f64 {
        if degree < self.pow_cache.len() && self.pow_cache[degree] != 0.0 {
            self.pow_cache[degree]
        } else {
            libm::pow(degree as f64, self.alpha)
        }
    }

    fn ensure_degree(&mut self, degree: usize) {
        if degree >= self.class_counts.len() {
            let new_len = (degree + 1)
                .next_power_of_two()
                .max(self.class_counts.len() * 2);
            self.class_counts.resize(new_len, 0);
            self.classes.resize_with(new_len, Vec::new);
            self.pow_cache.resize(new_len, 0.0);
        }
        if degree > self.tree.capacity() {
            // Capacity doubles via the power-of-two rounding inside rebuild,
            // so total rebuild work stays linear in the final max degree.
            let pows: Vec<(usize, f64)> = self
                .class_counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| (k, c as f64 * self.pow_cache[k]))
                .collect();
            self.tree.rebuild(degree, pows.into_iter());
        }
    }

    fn ensure_vertex(&mut self, id: VertexId) {
        let need = id as usize + 1;
        if self.vertex_degree.len() < need {
            self.vertex_degree.resize(need, 0);
            self.vertex_slot.resize(need, 0);
        }
    }

    fn cached_pow(&mut self, degree: usize) -> f64 {
        let w = self.pow_cache[degree];
        if w != 0.0 {
            w
        } else {
            let w = libm::pow(degree as f64, self.alpha);
            self.pow_cache[degree] = w;
            w
        }
    }

    fn bump_max(&mut self, degree: usize) {
        if degree > self.max_degree {
            self.max_degree = degree;
            self.count_at_max = 1;
        } else if degree == self.max_degree {
            self.count_at_max += 1;
        }
    }

    fn after_update(&mut self) {
        self.updates += 1;
        if self.updates >= REBUILD_INTERVAL {
            self.rebuild();
        }
    }

    /// Recomputes the Fenwick tree and total weight exactly from class counts.
    pub fn rebuild(&mut self) {
        for k in 1..=self.max_degree {
            if self.class_counts[k] > 0 && self.pow_cache[k] == 0.0 {
                self.pow_cache[k] = libm::pow(k as f64, self.alpha);
            }
        }
        let cap = self.tree.capacity().max(self.max_degree.max(1));
        let pairs: Vec<(usize, f64)> = self
            .class_counts()
            .map(|(k, c)| (k, c as f64 * self.pow_cache[k]))
            .collect();
        self.tree.rebuild(cap, pairs.into_iter());
        self.total_weight = self.recomputed_total_weight();
        self.updates = 0;
    }

    /// Exact total weight by a fresh scan; the drift oracle for `total_weight`.
    pub fn recomputed_total_weight(&self) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.class_counts() {
            acc += c as f64 * libm::pow(k as f64, self.alpha);
        }
        acc
    }

    /// Inserts a new vertex with the given initial degree (>= 1).
    pub fn add_vertex(&mut self, id: VertexId, degree: usize) -> Result<(), IndexError> {
        if degree == 0 {
            return Err(IndexError::ZeroDegree);
        }
        self.ensure_vertex(id);
        if self.vertex_degree[id as usize] != 0 {
            return Err(IndexError::DuplicateVertex(id));
        }
        self.ensure_degree(degree);
        let w = self.cached_pow(degree);
        self.class_counts[degree] += 1;
        self.classes[degree].push(id);
        self.vertex_degree[id as usize] = degree as u32;
        self.vertex_slot[id as usize] = (self.classes[degree].len() - 1) as u32;
        self.tree.add(degree, w);
        self.total_weight += w;
        self.degree_sum += degree as u64;
        self.vertex_count += 1;
        self.bump_max(degree);
        self.after_update();
        Ok(())
    }

    /// Moves a vertex from class `k` to `k + 1`; returns the new degree.
    pub fn increment_degree(&mut self, id: VertexId) -> Result<usize, IndexError> {
        let k = match self.degree_of(id) {
            Some(k) => k,
            None => return Err(IndexError::UnknownVertex(id)),
        };
        let k1 = k + 1;
        self.ensure_degree(k1);
        let w_old = self.cached_pow(k);
        let w_new = self.cached_pow(k1);

        // O(1) registry move: swap-remove from the old class, patch the
        // slot of whatever vertex got swapped into the vacated position.
        let slot = self.vertex_slot[id as usize] as usize;
        let old_class = &mut self.classes[k];
        let last = old_class.len() - 1;
        old_class.swap_remove(slot);
        if slot < last {
            let moved = old_class[slot];
            self.vertex_slot[moved as usize] = slot as u32;
        }
        self.classes[k1].push(id);
        self.vertex_slot[id as usize] = (self.classes[k1].len() - 1) as u32;
        self.vertex_degree[id as usize] = k1 as u32;
        self.class_counts[k] -= 1;
        self.class_counts[k1] += 1;

        self.tree.add(k, -w_old);
        self.tree.add(k1, w_new);
        self.total_weight += w_new - w_old;
        self.degree_sum += 1;
        self.bump_max(k1);
        self.after_update();
        Ok(k1)
    }

    /// `D(k) = sum_{j <= k} N(j) * j^alpha`; exactly `total_weight` for
    /// `k >= max_degree`.
    pub fn prefix_weight(&self, degree: usize) -> f64 {
        if degree == 0 {
            0.0
        } else if degree >= self.max_degree {
            self.total_weight
        } else {
            self.tree.prefix_sum(degree)
        }
    }

    /// The occupied degree `k` with `prefix_weight(k - 1) <= w < prefix_weight(k)`.
    pub fn find_class_by_weight(&self, w: f64) -> Result<usize, IndexError> {
        if !(w >= 0.0) || w >= self.total_weight {
            return Err(IndexError::WeightOutOfRange(w, self.total_weight));
        }
        let mut k = self.tree.lower_bound(w);
        // Float dust can strand the descent on an empty class; snap to the
        // nearest occupied one.
        if k > self.max_degree || self.class_counts[k] == 0 {
            let mut up = k.min(self.max_degree);
            while up <= self.max_degree && self.class_counts[up] == 0 {
                up += 1;
            }
            k = if up <= self.max_degree {
                up
            } else {
                let mut down = self.max_degree;
                while down > 0 && self.class_counts[down] == 0 {
                    down -= 1;
                }
                if down == 0 {
                    return Err(IndexError::WeightOutOfRange(w, self.total_weight));
                }
                down
            };
        }
        Ok(k)
    }

    /// Uniformly random member of class `k`.
    pub fn uniform_vertex_in_class(
        &self,
        degree: usize,
        rng: &mut impl Rng,
    ) -> Result<VertexId, IndexError> {
        let members = match self.classes.get(degree) {
            Some(m) if !m.is_empty() => m,
            _ => return Err(IndexError::EmptyClass(degree)),
        };
        Ok(members[rng.random_range(0..members.len())])
    }

    /// Text snapshot: one `degree count` pair per line, ascending degree.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        for (k, c) in self.class_counts() {
            out.push_str(&format!("{} {}\n", k, c));
        }
        out
    }

    pub fn from_snapshot(alpha: f64, text: &str) -> Result<Self, IndexError> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let bad = || IndexError::BadSnapshot(lineno + 1, String::from(line));
            let k: usize = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let c: u64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if fields.next().is_some() || k == 0 {
                return Err(bad());
            }
            pairs.push((k, c));
        }
        DegreeClassIndex::from_class_counts(alpha, pairs)
    }
}
