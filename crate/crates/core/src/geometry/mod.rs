//! Point clouds, triangle meshes and neighbor graphs.

mod kdtree;
mod knn;
mod triangle;

pub use kdtree::KdTree;
pub use knn::{expand_index, knn_accelerated, knn_bruteforce, knn_features};
pub use triangle::{closest_point_on_triangle, point_triangle_distance};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

#[inline]
pub fn sq_dist(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Ordered, non-empty list of finite 3D points. Row `i` is point `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud is empty"));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(format!("coordinate of point {i}")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Flattened row-major `N x 3` coordinates.
    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }

    pub fn from_flat(data: &[f64]) -> Result<Self> {
        if data.len() % 3 != 0 {
            return Err(Error::invalid(format!(
                "coordinate buffer length {} is not a multiple of 3",
                data.len()
            )));
        }
        Self::new(data.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn map(&self, f: impl Fn(&Point3) -> Point3) -> Result<Self> {
        Self::new(self.points.iter().map(f).collect())
    }
}

/// Triangle mesh with in-range indices and no zero-area faces.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Validates indices and drops degenerate faces. Returns the mesh and the
    /// number of faces dropped.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<(Self, usize)> {
        if let Some(i) = vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(format!("coordinate of vertex {i}")));
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::invalid(format!(
                    "face {fi} references vertex {bad}, but the mesh has {} vertices",
                    vertices.len()
                )));
            }
        }
        let before = faces.len();
        let faces: Vec<_> = faces
            .into_iter()
            .filter(|f| !is_degenerate(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]))
            .collect();
        let dropped = before - faces.len();
        Ok((Self { vertices, faces }, dropped))
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, f: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }
}

pub(crate) fn cross(u: &Point3, v: &Point3) -> Point3 {
    [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]
}

pub(crate) fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Zero area relative to the triangle's size: |cross|^2 <= 1e-24 * (longest edge)^4.
pub(crate) fn is_degenerate(a: &Point3, b: &Point3, c: &Point3) -> bool {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let n = cross(&ab, &ac);
    let area2 = dot(&n, &n);
    let scale = sq_dist(a, b).max(sq_dist(a, c)).max(sq_dist(b, c));
    scale == 0.0 || area2 <= 1e-24 * scale * scale
}

/// `rows x k` neighbor table over a point set of `rows` points. Each row lists
/// distinct indices other than the row itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexMatrix {
    rows: usize,
    k: usize,
    entries: Vec<usize>,
}

impl IndexMatrix {
    pub fn new(rows: usize, k: usize, entries: Vec<usize>) -> Result<Self> {
        if entries.len() != rows * k {
            return Err(Error::Shape {
                op: "index matrix",
                lhs: vec![rows, k],
                rhs: vec![entries.len()],
            });
        }
        for i in 0..rows {
            let row = &entries[i * k..(i + 1) * k];
            for (a, &j) in row.iter().enumerate() {
                if j >= rows {
                    return Err(Error::IndexOutOfRange { index: j, len: rows });
                }
                if j == i {
                    return Err(Error::invalid(format!("row {i} contains itself")));
                }
                if row[..a].contains(&j) {
                    return Err(Error::invalid(format!("row {i} repeats neighbor {j}")));
                }
            }
        }
        Ok(Self { rows, k, entries })
    }

    pub(crate) fn new_unchecked(rows: usize, k: usize, entries: Vec<usize>) -> Self {
        debug_assert_eq!(entries.len(), rows * k);
        Self { rows, k, entries }
    }

    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("index rows have different lengths"));
        }
        Self::new(rows.len(), k, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    pub fn to_rows(&self) -> Vec<Vec<usize>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Relabels the graph under a point permutation: point `i` moves to
    /// `perm[i]`, so row `perm[i]` of the result is `perm` applied to row `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.rows {
            return Err(Error::invalid("permutation length differs from row count"));
        }
        let mut entries = vec![0; self.entries.len()];
        for i in 0..self.rows {
            let dst = perm[i];
            for (t, &j) in self.row(i).iter().enumerate() {
                entries[dst * self.k + t] = perm[j];
            }
        }
        Self::new(self.rows, self.k, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cloud_rejects_empty_and_nan() {
        assert!(PointCloud::new(vec![]).is_err());
        assert!(matches!(
            PointCloud::new(vec![[0.0, f64::NAN, 0.0]]),
            Err(Error::NonFinite(_))
        ));
        let c = PointCloud::from_flat(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(c.points()[1], [4.0, 5.0, 6.0]);
    }

    #[test]
    fn mesh_filters_degenerate_faces() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]];
        let (mesh, dropped) = TriangleMesh::new(v.clone(), vec![[0, 1, 2], [0, 1, 3], [0, 0, 2]]).unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2]]);
        assert_eq!(dropped, 2);
        assert!(TriangleMesh::new(v, vec![[0, 1, 9]]).is_err());
    }

    #[test]
    fn index_matrix_invariants() {
        assert!(IndexMatrix::from_rows(&[vec![1], vec![0]]).is_ok());
        assert!(IndexMatrix::from_rows(&[vec![0], vec![0]]).is_err());
        assert!(IndexMatrix::from_rows(&[vec![1, 1], vec![0, 0]]).is_err());
        assert!(IndexMatrix::from_rows(&[vec![2], vec![0]]).is_err());
    }

    #[test]
    fn permutation_relabels_rows_and_entries() {
        let idx = IndexMatrix::from_rows(&[vec![1], vec![2], vec![0]]).unwrap();
        let perm = [2, 0, 1];
        let p = idx.permuted(&perm).unwrap();
        // old 0 -> new 2 with neighbor old 1 -> new 0
        assert_eq!(p.row(2), &[0]);
        assert_eq!(p.row(0), &[1]);
        assert_eq!(p.row(1), &[2]);
    }
}
