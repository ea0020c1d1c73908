//! Chamfer, Hausdorff and point-to-face distances.
//!
//! Conventions: Chamfer sums the two directed means of *squared*
//! nearest-neighbor distances; Hausdorff is the larger of the two directed
//! maxima of *unsquared* distances; point-to-face is the mean unsquared
//! distance from each predicted point to the reference mesh (one direction
//! only). Values are raw; tables scale by 1e3 when formatting.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{closest_point_on_triangle, sq_dist, KdTree, Point3, PointCloud, TriangleMesh};
use crate::tensor::{Tape, Var};

/// Squared distance from every point of `from` to its nearest point in `to`.
fn directed_sq(from: &[Point3], to: &KdTree) -> Vec<f64> {
    from.iter()
        .map(|p| to.nearest(p).expect("non-empty cloud").1)
        .collect()
}

pub fn chamfer(pred: &PointCloud, gt: &PointCloud) -> f64 {
    let forward = directed_sq(pred.points(), &KdTree::new(gt.points()));
    let backward = directed_sq(gt.points(), &KdTree::new(pred.points()));
    forward.iter().sum::<f64>() / forward.len() as f64
        + backward.iter().sum::<f64>() / backward.len() as f64
}

pub fn hausdorff(pred: &PointCloud, gt: &PointCloud) -> f64 {
    let forward = directed_sq(pred.points(), &KdTree::new(gt.points()));
    let backward = directed_sq(gt.points(), &KdTree::new(pred.points()));
    forward
        .iter()
        .chain(&backward)
        .fold(0.0f64, |m, &d| m.max(d))
        .sqrt()
}

/// Unsquared distance from `p` to the nearest face of `mesh`.
pub fn point_mesh_distance(p: &Point3, mesh: &TriangleMesh) -> f64 {
    (0..mesh.faces().len())
        .map(|f| sq_dist(p, &closest_point_on_triangle(p, &mesh.triangle(f))))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

pub fn point_to_face(pred: &PointCloud, mesh: &TriangleMesh) -> Result<f64> {
    if mesh.is_empty() {
        return Err(Error::invalid("mesh has no faces"));
    }
    // per-point values are independent; the sum runs in point order
    let per_point: Vec<f64> = pred
        .points()
        .par_iter()
        .map(|p| point_mesh_distance(p, mesh))
        .collect();
    Ok(per_point.iter().sum::<f64>() / per_point.len() as f64)
}

/// One row of a metric table.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub label: String,
    pub cd: f64,
    pub hd: f64,
    pub p2f: Option<f64>,
    pub n_pred: usize,
    pub n_gt: usize,
}

impl MetricReport {
    pub fn compute(
        label: impl Into<String>,
        pred: &PointCloud,
        gt: &PointCloud,
        mesh: Option<&TriangleMesh>,
    ) -> Result<Self> {
        Ok(Self {
            label: label.into(),
            cd: chamfer(pred, gt),
            hd: hausdorff(pred, gt),
            p2f: mesh.map(|m| point_to_face(pred, m)).transpose()?,
            n_pred: pred.len(),
            n_gt: gt.len(),
        })
    }

    /// Mean over rows; `p2f` only when every row has it.
    pub fn mean(label: impl Into<String>, rows: &[MetricReport]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("cannot average zero metric rows"));
        }
        let n = rows.len() as f64;
        let p2f = rows
            .iter()
            .map(|r| r.p2f)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n);
        Ok(Self {
            label: label.into(),
            cd: rows.iter().map(|r| r.cd).sum::<f64>() / n,
            hd: rows.iter().map(|r| r.hd).sum::<f64>() / n,
            p2f,
            n_pred: rows.iter().map(|r| r.n_pred).sum(),
            n_gt: rows.iter().map(|r| r.n_gt).sum(),
        })
    }
}

/// Chamfer distance between the `P x 3` coordinates in `pred` and a fixed
/// ground truth, recorded on the tape. Nearest-neighbor assignments are held
/// fixed for the gradient (the function is piecewise smooth).
pub fn chamfer_loss(tape: &mut Tape, pred: Var, gt: &PointCloud, gt_tree: &KdTree) -> Result<Var> {
    let value = tape.value(pred);
    if value.rank() != 2 || value.width() != 3 {
        return Err(Error::invalid(format!(
            "chamfer loss expects P x 3 coordinates, got {:?}",
            value.shape()
        )));
    }
    if let Some(i) = value.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("predicted coordinate in row {}", i / 3)));
    }
    let pts: Vec<Point3> = value.data().chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    let np = pts.len() as f64;
    let nq = gt.len() as f64;
    let mut grad = vec![0.0; pts.len() * 3];
    let mut loss_fwd = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let (j, d) = gt_tree.nearest(p).expect("gt not empty");
        loss_fwd += d;
        let q = gt.points()[j];
        for a in 0..3 {
            grad[3 * i + a] += 2.0 * (p[a] - q[a]) / np;
        }
    }
    let pred_tree = KdTree::new(&pts);
    let mut loss_bwd = 0.0;
    for q in gt.points() {
        let (i, d) = pred_tree.nearest(q).expect("pred not empty");
        loss_bwd += d;
        let p = pts[i];
        for a in 0..3 {
            grad[3 * i + a] += 2.0 * (p[a] - q[a]) / nq;
        }
    }
    tape.scalar_fn(pred, loss_fwd / np + loss_bwd / nq, grad)
}
