//! Cover tree for exact nearest-neighbor queries.
//!
//! Insertion-based construction in point order with expansion base 2. Three
//! structural invariants hold (see [`CoverTree::audit`]): nesting (a node is
//! implicitly its own child on every deeper level), covering (a child
//! attached at level `l` lies within `2^(l+1)` of its parent), and
//! separation (nodes present at level `l` are pairwise more than `2^l`
//! apart). Queries only rely on the covering bound — every descendant of a
//! node at level `l` lies within `2^(l+1)` of it — so they stay exact even
//! on adversarial data.
//!
//! Exactly co-located points are stored as duplicate indices on one node;
//! all of them are reported by queries.

use crate::error::Result;
use crate::matrix::{dist, Matrix};
use crate::neighbors::{validate_k, KBest};

#[derive(Debug, Clone)]
struct Node {
    point: usize,
    level: i32,
    children: Vec<usize>,
    duplicates: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CoverTree {
    points: Matrix,
    nodes: Vec<Node>,
    root: usize,
}

impl CoverTree {
    /// Builds by inserting rows in order; deterministic for a fixed order.
    pub fn build(points: Matrix) -> Result<Self> {
        if points.rows() == 0 {
            return Err(crate::error::Error::InvalidData(
                "cannot index an empty point set".into(),
            ));
        }
        let mut tree = Self {
            points,
            nodes: Vec::new(),
            root: 0,
        };
        tree.nodes.push(Node {
            point: 0,
            level: 0,
            children: Vec::new(),
            duplicates: Vec::new(),
        });
        for p in 1..tree.points.rows() {
            tree.insert(p);
        }
        Ok(tree)
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    /// Number of distinct tree nodes (co-located points share one).
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn insert(&mut self, p: usize) {
        let query = self.points.row(p).to_vec();
        let d_root = dist(&query, self.points.row(self.nodes[self.root].point));
        if d_root == 0.0 {
            self.nodes[self.root].duplicates.push(p);
            return;
        }
        // raise the root level until its ball covers the new point
        if d_root > exp2i(self.nodes[self.root].level) {
            self.nodes[self.root].level = d_root.log2().ceil() as i32;
        }

        let mut level = self.nodes[self.root].level;
        // candidate set Q_i for the current level
        let mut candidates: Vec<(usize, f64)> = vec![(self.root, d_root)];
        // deepest (parent, child level) where attaching keeps the cover
        let mut placement: Option<(usize, i32)> = None;
        loop {
            // viable here if some candidate lies within 2^level; the closest
            // becomes the parent (ties by lower point index)
            let closest = candidates
                .iter()
                .min_by(|a, b| {
                    a.1.total_cmp(&b.1)
                        .then(self.nodes[a.0].point.cmp(&self.nodes[b.0].point))
                })
                .copied()
                .expect("candidate set never empty");
            let radius = exp2i(level);
            if closest.1 <= radius {
                placement = Some((closest.0, level - 1));
            }

            // expand: candidates (their own self-children) plus explicit
            // children one level down
            let mut expanded = candidates.clone();
            for &(nid, _) in &candidates {
                for ci in 0..self.nodes[nid].children.len() {
                    let ch = self.nodes[nid].children[ci];
                    if self.nodes[ch].level != level - 1 {
                        continue;
                    }
                    let dch = dist(&query, self.points.row(self.nodes[ch].point));
                    if dch == 0.0 {
                        self.nodes[ch].duplicates.push(p);
                        return;
                    }
                    expanded.push((ch, dch));
                }
            }
            // descent fails once everything is farther than 2^level
            let reachable: Vec<(usize, f64)> = expanded
                .into_iter()
                .filter(|&(_, d)| d <= radius)
                .collect();
            if reachable.is_empty() {
                break;
            }
            candidates = reachable;
            level -= 1;
        }

        let (parent, child_level) = placement.expect("root ball covers the point");
        let id = self.nodes.len();
        self.nodes.push(Node {
            point: p,
            level: child_level,
            children: Vec::new(),
            duplicates: Vec::new(),
        });
        self.nodes[parent].children.push(id);
    }

    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
        Ok(self.knn_counted(query, k)?.0)
    }

    /// Like [`Self::knn`] but also reports how many tree nodes were visited,
    /// for query-cost measurements.
    pub fn knn_counted(&self, query: &[f64], k: usize) -> Result<(Vec<(usize, f64)>, usize)> {
        validate_k(k, self.points.rows())?;
        let mut best = KBest::new(k);
        let mut visited = 0usize;
        let d_root = dist(query, self.points.row(self.nodes[self.root].point));
        self.search(self.root, d_root, query, &mut best, &mut visited);
        Ok((best.into_sorted(), visited))
    }

    fn search(&self, nid: usize, d: f64, query: &[f64], best: &mut KBest, visited: &mut usize) {
        *visited += 1;
        let node = &self.nodes[nid];
        best.offer(d, node.point);
        for &dup in &node.duplicates {
            best.offer(d, dup);
        }
        let mut children: Vec<(usize, f64)> = node
            .children
            .iter()
            .map(|&ch| (ch, dist(query, self.points.row(self.nodes[ch].point))))
            .collect();
        children.sort_by(|a, b| a.1.total_cmp(&b.1));
        for (ch, dch) in children {
            // every descendant of ch lies within 2^(level+1) of it
            let lower_bound = dch - exp2i(self.nodes[ch].level + 1);
            if lower_bound <= best.threshold() {
                self.search(ch, dch, query, best, visited);
            }
        }
    }

    pub fn nearest(&self, query: &[f64]) -> Result<usize> {
        Ok(self.knn(query, 1)?[0].0)
    }

    /// Checks the three structural invariants plus point completeness;
    /// returns a description of the first violation.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let mut stored = 0usize;
        for node in &self.nodes {
            stored += 1 + node.duplicates.len();
        }
        if stored != self.points.rows() {
            return Err(format!(
                "{stored} points stored, expected {}",
                self.points.rows()
            ));
        }
        // covering + strictly decreasing levels along edges
        for (pid, node) in self.nodes.iter().enumerate() {
            for &ch in &node.children {
                let child = &self.nodes[ch];
                if child.level >= node.level {
                    return Err(format!(
                        "child {} at level {} under parent {} at level {}",
                        child.point, child.level, node.point, node.level
                    ));
                }
                let d = dist(
                    self.points.row(node.point),
                    self.points.row(child.point),
                );
                if d > exp2i(child.level + 1) {
                    return Err(format!(
                        "covering violated: node {pid} -> child {ch} at distance {d} with level {}",
                        child.level
                    ));
                }
            }
        }
        // separation: any two nodes must be further apart than 2^min(levels)
        for i in 0..self.nodes.len() {
            for j in (i + 1)..self.nodes.len() {
                let a = &self.nodes[i];
                let b = &self.nodes[j];
                let d = dist(self.points.row(a.point), self.points.row(b.point));
                let level = a.level.min(b.level);
                if d <= exp2i(level) {
                    return Err(format!(
                        "separation violated: nodes {} and {} at distance {d}, shared level {level}",
                        a.point, b.point
                    ));
                }
            }
        }
        Ok(())
    }
}

fn exp2i(level: i32) -> f64 {
    f64::from(level).exp2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::BruteForceIndex;
    use crate::seeding;
    use rand::Rng;

    fn random_points(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = seeding::rng(seed);
        Matrix::new(n, d, (0..n * d).map(|_| rng.random_range(-10.0..10.0)).collect()).unwrap()
    }

    #[test]
    fn single_point_tree() {
        let tree = CoverTree::build(Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(tree.nearest(&[50.0, 50.0]).unwrap(), 0);
        assert_eq!(tree.node_count(), 1);
        tree.audit().unwrap();
    }

    #[test]
    fn duplicates_are_all_retrievable() {
        let tree = CoverTree::build(
            Matrix::from_rows(&[vec![1.0], vec![5.0], vec![1.0], vec![1.0]]).unwrap(),
        )
        .unwrap();
        tree.audit().unwrap();
        let hits = tree.knn(&[1.0], 3).unwrap();
        let indices: Vec<usize> = hits.iter().map(|h| h.0).collect();
        assert_eq!(indices, vec![0, 2, 3]);
        assert!(hits.iter().all(|h| h.1 == 0.0));
    }

    #[test]
    fn stored_point_query_prefers_lowest_index() {
        let tree = CoverTree::build(
            Matrix::from_rows(&[vec![2.0], vec![7.0], vec![2.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(tree.nearest(&[2.0]).unwrap(), 0);
    }

    #[test]
    fn small_line_query() {
        let tree =
            CoverTree::build(Matrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap())
                .unwrap();
        let hits = tree.knn(&[0.4], 2).unwrap();
        assert_eq!(hits[0].0, 0);
        assert_eq!(hits[1].0, 1);
    }

    #[test]
    fn invariants_hold_on_random_data() {
        let tree = CoverTree::build(random_points(500, 3, 7)).unwrap();
        tree.audit().unwrap();
    }

    #[test]
    fn matches_brute_force() {
        let points = random_points(300, 4, 11);
        let tree = CoverTree::build(points.clone()).unwrap();
        let brute = BruteForceIndex::build(points).unwrap();
        let mut rng = seeding::rng(12);
        for _ in 0..200 {
            let query: Vec<f64> = (0..4).map(|_| rng.random_range(-12.0..12.0)).collect();
            let k = rng.random_range(1..20);
            let a = tree.knn(&query, k).unwrap();
            let b = brute.knn(&query, k).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn query_visits_grow_sublinearly() {
        // measured sanity, not a tight bound: doubling N on uniform data
        // should cost far less than double the node visits
        let mut mean_visits = Vec::new();
        for &n in &[2000usize, 8000] {
            let tree = CoverTree::build(random_points(n, 2, 17)).unwrap();
            let mut rng = seeding::rng(18);
            let mut total = 0usize;
            let queries = 200;
            for _ in 0..queries {
                let query: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
                total += tree.knn_counted(&query, 5).unwrap().1;
            }
            mean_visits.push(total as f64 / queries as f64);
        }
        let growth = mean_visits[1] / mean_visits[0];
        println!("mean visits: {mean_visits:?}, growth x{growth:.2} for 4x points");
        assert!(growth < 3.0, "visit growth {growth:.2} looks linear");
    }

    #[test]
    fn build_is_deterministic() {
        let points = random_points(100, 2, 3);
        let a = CoverTree::build(points.clone()).unwrap();
        let b = CoverTree::build(points).unwrap();
        let mut rng = seeding::rng(4);
        for _ in 0..50 {
            let query: Vec<f64> = (0..2).map(|_| rng.random_range(-12.0..12.0)).collect();
            assert_eq!(a.knn(&query, 5).unwrap(), b.knn(&query, 5).unwrap());
        }
    }
}
