//! Linear-scan nearest-neighbor index: the oracle the cover tree is tested
//! against and the sensible choice for tiny point sets.

use crate::error::Result;
use crate::matrix::{dist, Matrix};
use crate::neighbors::{validate_k, KBest};

#[derive(Debug, Clone)]
pub struct BruteForceIndex {
    points: Matrix,
}

impl BruteForceIndex {
    pub fn build(points: Matrix) -> Result<Self> {
        if points.rows() == 0 {
            return Err(crate::error::Error::InvalidData(
                "cannot index an empty point set".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
        validate_k(k, self.points.rows())?;
        let mut best = KBest::new(k);
        for (i, row) in self.points.iter_rows().enumerate() {
            best.offer(dist(query, row), i);
        }
        Ok(best.into_sorted())
    }

    pub fn nearest(&self, query: &[f64]) -> Result<usize> {
        Ok(self.knn(query, 1)?[0].0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_finds_and_ranks() {
        let points = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let idx = BruteForceIndex::build(points).unwrap();
        let hits = idx.knn(&[0.4], 2).unwrap();
        assert_eq!(hits[0].0, 0);
        assert_eq!(hits[1].0, 1);
        assert!(idx.knn(&[0.0], 4).is_err());
        assert_eq!(idx.nearest(&[2.9]).unwrap(), 2);
    }
}
