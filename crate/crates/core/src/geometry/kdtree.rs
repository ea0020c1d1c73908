use std::cmp::Ordering;

use super::{sq_dist, Point3};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Exact 3D k-d tree.
///
/// Results are ordered by `(squared distance, index)`, the same order the
/// brute-force scan uses, so both agree exactly including ties.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

fn key_cmp(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the axis of widest spread
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] == 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end }); // placeholder
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query` as `(squared distance, index)`,
    /// ascending, optionally skipping one index (the query point itself).
    pub fn knn(&self, query: &Point3, k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let mut best = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, query, k, exclude, &mut best);
        }
        best
    }

    /// Nearest point as `(index, squared distance)`; ties go to the smaller index.
    pub fn nearest(&self, query: &Point3) -> Option<(usize, f64)> {
        self.knn(query, 1, None).first().map(|&(d, i)| (i, d))
    }

    fn search(
        &self,
        node: usize,
        q: &Point3,
        k: usize,
        exclude: Option<usize>,
        best: &mut Vec<(f64, usize)>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = (sq_dist(q, &self.points[i]), i);
                    if best.len() == k && key_cmp(&cand, best.last().unwrap()) != Ordering::Less {
                        continue;
                    }
                    let at = best
                        .binary_search_by(|probe| key_cmp(probe, &cand))
                        .unwrap_or_else(|e| e);
                    best.insert(at, cand);
                    best.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, exclude, best);
                // `<=` keeps equidistant candidates with smaller indices reachable.
                if best.len() < k || diff * diff <= best.last().unwrap().0 {
                    self.search(far, q, k, exclude, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_prefers_smaller_index_on_ties() {
        let pts: Vec<Point3> = (0..40).map(|i| [(i % 2) as f64 * 2.0, 0.0, 0.0]).collect();
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(&[1.0, 0.0, 0.0]), Some((0, 1.0)));
        let ks = tree.knn(&[0.0, 0.0, 0.0], 3, Some(0));
        assert_eq!(ks.iter().map(|p| p.1).collect::<Vec<_>>(), vec![2, 4, 6]);
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::new(&[]);
        assert!(tree.nearest(&[0.0; 3]).is_none());
    }
}
