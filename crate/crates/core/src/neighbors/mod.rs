//! Exact nearest-neighbor search: a cover tree for scale, a brute-force
//! scan as the swappable reference backend, and the shared k-best machinery
//! with one tie rule (smaller distance first, then lower point index).

mod brute;
mod cover_tree;

pub use brute::BruteForceIndex;
pub use cover_tree::CoverTree;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Which index implementation to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexBackend {
    CoverTree,
    BruteForce,
}

/// Exact nearest-neighbor index over an owned point set.
#[derive(Debug, Clone)]
pub enum NnIndex {
    Cover(CoverTree),
    Brute(BruteForceIndex),
}

impl NnIndex {
    pub fn build(backend: IndexBackend, points: Matrix) -> Result<Self> {
        match backend {
            IndexBackend::CoverTree => Ok(Self::Cover(CoverTree::build(points)?)),
            IndexBackend::BruteForce => Ok(Self::Brute(BruteForceIndex::build(points)?)),
        }
    }

    pub fn points(&self) -> &Matrix {
        match self {
            Self::Cover(t) => t.points(),
            Self::Brute(b) => b.points(),
        }
    }

    pub fn len(&self) -> usize {
        self.points().rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `k` nearest stored points, ascending by distance.
    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
        match self {
            Self::Cover(t) => t.knn(query, k),
            Self::Brute(b) => b.knn(query, k),
        }
    }

    /// Index of the single nearest stored point.
    pub fn nearest(&self, query: &[f64]) -> Result<usize> {
        Ok(self.knn(query, 1)?[0].0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    idx: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // max-heap order: the worst candidate (larger distance, then larger
    // index) sits on top
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded candidate heap keeping the `k` best `(distance, index)` pairs.
pub(crate) struct KBest {
    k: usize,
    heap: BinaryHeap<HeapEntry>,
}

impl KBest {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    /// Distance a new candidate must not exceed to be useful.
    pub fn threshold(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |w| w.dist)
        }
    }

    pub fn offer(&mut self, dist: f64, idx: usize) {
        let entry = HeapEntry { dist, idx };
        if self.heap.len() < self.k {
            self.heap.push(entry);
        } else if let Some(worst) = self.heap.peek() {
            if entry < *worst {
                self.heap.pop();
                self.heap.push(entry);
            }
        }
    }

    pub fn into_sorted(self) -> Vec<(usize, f64)> {
        let mut out: Vec<HeapEntry> = self.heap.into_vec();
        out.sort();
        out.into_iter().map(|e| (e.idx, e.dist)).collect()
    }
}

pub(crate) fn validate_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParam(format!(
            "k = {k} exceeds the {n} stored points"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kbest_keeps_lowest_distances_and_breaks_ties_by_index() {
        let mut kb = KBest::new(2);
        kb.offer(3.0, 0);
        kb.offer(1.0, 5);
        kb.offer(1.0, 2);
        kb.offer(2.0, 7);
        assert_eq!(kb.into_sorted(), vec![(2, 1.0), (5, 1.0)]);
    }

    #[test]
    fn kbest_threshold_tracks_worst_kept() {
        let mut kb = KBest::new(2);
        assert_eq!(kb.threshold(), f64::INFINITY);
        kb.offer(4.0, 1);
        assert_eq!(kb.threshold(), f64::INFINITY);
        kb.offer(2.0, 2);
        assert_eq!(kb.threshold(), 4.0);
        kb.offer(1.0, 3);
        assert_eq!(kb.threshold(), 2.0);
    }
}
