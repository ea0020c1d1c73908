use super::{sq_dist, IndexMatrix, KdTree, PointCloud};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "neighbor count k = {k} must satisfy 1 <= k < {n} (number of points)"
        )));
    }
    Ok(())
}

/// Exhaustive scan ordered by `(squared distance, index)`, self excluded.
fn brute_rows(n: usize, k: usize, dist: impl Fn(usize, usize) -> f64) -> IndexMatrix {
    let mut entries = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
        }
        cand.sort_by(cmp);
        entries.extend(cand.iter().map(|c| c.1));
    }
    IndexMatrix::new_unchecked(n, k, entries)
}

/// Exact KNN graph by exhaustive search: row `i` holds the `k` nearest other
/// points in ascending distance, ties broken by smaller index.
pub fn knn_bruteforce(cloud: &PointCloud, k: usize) -> Result<IndexMatrix> {
    check_k(k, cloud.len())?;
    let p = cloud.points();
    Ok(brute_rows(p.len(), k, |i, j| sq_dist(&p[i], &p[j])))
}

/// Same contract as [`knn_bruteforce`], answered with a k-d tree.
pub fn knn_accelerated(cloud: &PointCloud, k: usize) -> Result<IndexMatrix> {
    check_k(k, cloud.len())?;
    let tree = KdTree::new(cloud.points());
    let mut entries = Vec::with_capacity(cloud.len() * k);
    for (i, q) in cloud.points().iter().enumerate() {
        entries.extend(tree.knn(q, k, Some(i)).into_iter().map(|(_, j)| j));
    }
    Ok(IndexMatrix::new_unchecked(cloud.len(), k, entries))
}

/// KNN graph in feature space: rows of an `M x C` tensor, squared Euclidean
/// distance, same ordering and tie rule as [`knn_bruteforce`].
pub fn knn_features(features: &Tensor, k: usize) -> Result<IndexMatrix> {
    if features.rank() != 2 {
        return Err(Error::invalid(format!(
            "knn_features expects an M x C matrix, got {:?}",
            features.shape()
        )));
    }
    let m = features.rows();
    check_k(k, m)?;
    Ok(brute_rows(m, k, |i, j| {
        features
            .row(i)
            .iter()
            .zip(features.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }))
}

/// Graph for the doubled point set: rows `2i` and `2i+1` (the two children of
/// point `i`) both take row `i` with every neighbor `j` mapped to `2j`, the
/// first child of `j`.
pub fn expand_index(idx: &IndexMatrix) -> IndexMatrix {
    let k = idx.k();
    let mut entries = Vec::with_capacity(2 * idx.rows() * k);
    for i in 0..idx.rows() {
        let mapped: Vec<usize> = idx.row(i).iter().map(|&j| 2 * j).collect();
        entries.extend_from_slice(&mapped);
        entries.extend_from_slice(&mapped);
    }
    IndexMatrix::new_unchecked(2 * idx.rows(), k, entries)
}
