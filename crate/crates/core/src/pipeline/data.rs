use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, TriangleMesh};

/// Parametric closed surface used in place of a scanned-model corpus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyntheticShape {
    Sphere { radius: f64 },
    Torus { major: f64, minor: f64 },
    /// Closed cylinder (side plus both caps) centered at the origin, axis `z`.
    Cylinder { radius: f64, height: f64 },
    /// Surface of an axis-aligned box centered at the origin.
    BoxSurface { size: [f64; 3] },
}

impl SyntheticShape {
    pub const NAMES: [&'static str; 4] = ["sphere", "torus", "cylinder", "box_surface"];

    /// The four shapes at their default, roughly unit, scale.
    pub fn standard_set() -> Vec<SyntheticShape> {
        Self::NAMES.iter().map(|n| n.parse().unwrap()).collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticShape::Sphere { .. } => "sphere",
            SyntheticShape::Torus { .. } => "torus",
            SyntheticShape::Cylinder { .. } => "cylinder",
            SyntheticShape::BoxSurface { .. } => "box_surface",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SyntheticShape::Sphere { radius } => radius > 0.0 && radius.is_finite(),
            SyntheticShape::Torus { major, minor } => minor > 0.0 && major > minor && major.is_finite(),
            SyntheticShape::Cylinder { radius, height } => {
                radius > 0.0 && height > 0.0 && radius.is_finite() && height.is_finite()
            }
            SyntheticShape::BoxSurface { size } => size.iter().all(|&s| s > 0.0 && s.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid shape parameters: {self:?}")))
        }
    }

    /// One point drawn uniformly with respect to surface area.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Point3 {
        match *self {
            SyntheticShape::Sphere { radius } => loop {
                let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 1e-9 {
                    break [radius * v[0] / n, radius * v[1] / n, radius * v[2] / n];
                }
            },
            SyntheticShape::Torus { major, minor } => {
                // area element is proportional to (major + minor cos v)
                let v = loop {
                    let v = rng.gen_range(0.0..TAU);
                    if rng.gen::<f64>() * (major + minor) <= major + minor * v.cos() {
                        break v;
                    }
                };
                let u = rng.gen_range(0.0..TAU);
                let ring = major + minor * v.cos();
                [ring * u.cos(), ring * u.sin(), minor * v.sin()]
            }
            SyntheticShape::Cylinder { radius, height } => {
                let side = TAU * radius * height;
                let cap = PI * radius * radius;
                let pick = rng.gen::<f64>() * (side + 2.0 * cap);
                let t = rng.gen_range(0.0..TAU);
                if pick < side {
                    let z = rng.gen_range(-0.5 * height..=0.5 * height);
                    [radius * t.cos(), radius * t.sin(), z]
                } else {
                    let rho = radius * rng.gen::<f64>().sqrt();
                    let z = if pick < side + cap { 0.5 * height } else { -0.5 * height };
                    [rho * t.cos(), rho * t.sin(), z]
                }
            }
            SyntheticShape::BoxSurface { size } => {
                let h = [0.5 * size[0], 0.5 * size[1], 0.5 * size[2]];
                // face normal axis weighted by the area of that face pair
                let areas = [size[1] * size[2], size[0] * size[2], size[0] * size[1]];
                let mut pick = rng.gen::<f64>() * (areas[0] + areas[1] + areas[2]);
                let mut axis = 2;
                for (a, &area) in areas.iter().enumerate() {
                    if pick < area {
                        axis = a;
                        break;
                    }
                    pick -= area;
                }
                let mut p = [0.0; 3];
                for (a, c) in p.iter_mut().enumerate() {
                    *c = rng.gen_range(-h[a]..=h[a]);
                }
                p[axis] = if rng.gen::<bool>() { h[axis] } else { -h[axis] };
                p
            }
        }
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Point3> {
        (0..n).map(|_| self.sample_point(rng)).collect()
    }

    /// Unsigned distance from `p` to the surface.
    pub fn surface_distance(&self, p: &Point3) -> f64 {
        match *self {
            SyntheticShape::Sphere { radius } => ((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - radius).abs(),
            SyntheticShape::Torus { major, minor } => {
                let q = (p[0] * p[0] + p[1] * p[1]).sqrt() - major;
                ((q * q + p[2] * p[2]).sqrt() - minor).abs()
            }
            SyntheticShape::Cylinder { radius, height } => {
                let dr = (p[0] * p[0] + p[1] * p[1]).sqrt() - radius;
                let dz = p[2].abs() - 0.5 * height;
                let outside = (dr.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt();
                (outside + dr.max(dz).min(0.0)).abs()
            }
            SyntheticShape::BoxSurface { size } => {
                let d: Vec<f64> = (0..3).map(|a| p[a].abs() - 0.5 * size[a]).collect();
                let outside = d.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
                (outside + d[0].max(d[1]).max(d[2]).min(0.0)).abs()
            }
        }
    }

    /// Triangulation of the surface, vertices exactly on it.
    pub fn mesh(&self) -> Result<TriangleMesh> {
        self.validate()?;
        let (vertices, faces) = match *self {
            SyntheticShape::Sphere { radius } => {
                let (nlat, nlon) = (24, 48);
                let mut v = vec![[0.0, 0.0, radius]];
                for i in 1..nlat {
                    let theta = PI * i as f64 / nlat as f64;
                    for j in 0..nlon {
                        let phi = TAU * j as f64 / nlon as f64;
                        v.push([
                            radius * theta.sin() * phi.cos(),
                            radius * theta.sin() * phi.sin(),
                            radius * theta.cos(),
                        ]);
                    }
                }
                v.push([0.0, 0.0, -radius]);
                let south = v.len() - 1;
                let ring = |i: usize, j: usize| 1 + (i - 1) * nlon + j % nlon;
                let mut f = Vec::new();
                for j in 0..nlon {
                    f.push([0, ring(1, j), ring(1, j + 1)]);
                    f.push([south, ring(nlat - 1, j + 1), ring(nlat - 1, j)]);
                }
                for i in 1..nlat - 1 {
                    for j in 0..nlon {
                        f.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
                        f.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
                    }
                }
                (v, f)
            }
            SyntheticShape::Torus { major, minor } => {
                let (nu, nv) = (64, 32);
                let mut v = Vec::with_capacity(nu * nv);
                for i in 0..nu {
                    let u = TAU * i as f64 / nu as f64;
                    for j in 0..nv {
                        let t = TAU * j as f64 / nv as f64;
                        let ring = major + minor * t.cos();
                        v.push([ring * u.cos(), ring * u.sin(), minor * t.sin()]);
                    }
                }
                let at = |i: usize, j: usize| (i % nu) * nv + j % nv;
                let mut f = Vec::new();
                for i in 0..nu {
                    for j in 0..nv {
                        f.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
                        f.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
                    }
                }
                (v, f)
            }
            SyntheticShape::Cylinder { radius, height } => {
                let n = 64;
                let h = 0.5 * height;
                let mut v = vec![[0.0, 0.0, -h], [0.0, 0.0, h]];
                for z in [-h, h] {
                    for j in 0..n {
                        let t = TAU * j as f64 / n as f64;
                        v.push([radius * t.cos(), radius * t.sin(), z]);
                    }
                }
                let bottom = |j: usize| 2 + j % n;
                let top = |j: usize| 2 + n + j % n;
                let mut f = Vec::new();
                for j in 0..n {
                    f.push([0, bottom(j + 1), bottom(j)]);
                    f.push([1, top(j), top(j + 1)]);
                    f.push([bottom(j), bottom(j + 1), top(j + 1)]);
                    f.push([bottom(j), top(j + 1), top(j)]);
                }
                (v, f)
            }
            SyntheticShape::BoxSurface { size } => {
                let h = [0.5 * size[0], 0.5 * size[1], 0.5 * size[2]];
                let v: Vec<Point3> = (0..8)
                    .map(|c| {
                        [
                            if c & 1 == 0 { -h[0] } else { h[0] },
                            if c & 2 == 0 { -h[1] } else { h[1] },
                            if c & 4 == 0 { -h[2] } else { h[2] },
                        ]
                    })
                    .collect();
                let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
                let f = quads
                    .iter()
                    .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
                    .collect();
                (v, f)
            }
        };
        Ok(TriangleMesh::new(vertices, faces)?.0)
    }
}

impl fmt::Display for SyntheticShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(SyntheticShape::Sphere { radius: 1.0 }),
            "torus" => Ok(SyntheticShape::Torus { major: 0.7, minor: 0.3 }),
            "cylinder" => Ok(SyntheticShape::Cylinder { radius: 0.6, height: 1.4 }),
            "box_surface" | "box" => Ok(SyntheticShape::BoxSurface { size: [1.2, 0.9, 0.7] }),
            _ => Err(Error::invalid(format!(
                "unknown shape `{s}` (expected one of: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

/// Sparse input, dense ground truth and the reference surface.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub name: String,
    pub input: PointCloud,
    pub gt: PointCloud,
    pub mesh: TriangleMesh,
}

/// `n` input points and `ratio * n` ground-truth points on `shape`.
///
/// The ground truth is a uniform draw; the input is a random subset of a
/// second, independent uniform draw of the same size.
pub fn sample_pair(shape: &SyntheticShape, n: usize, ratio: usize, seed: u64) -> Result<Sample> {
    shape.validate()?;
    if n < 8 {
        return Err(Error::invalid(format!("need at least 8 input points, got {n}")));
    }
    if ratio == 0 {
        return Err(Error::invalid("ratio must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gt = shape.sample(ratio * n, &mut rng);
    let pool = shape.sample(ratio * n, &mut rng);
    let input = index::sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    Ok(Sample {
        name: shape.name().to_string(),
        input: PointCloud::new(input)?,
        gt: PointCloud::new(gt)?,
        mesh: shape.mesh()?,
    })
}

/// One sample per shape and per repetition, with seeds derived from `seed`.
pub fn synthetic_dataset(shapes: &[SyntheticShape], per_shape: usize, n: usize, ratio: usize, seed: u64) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(shapes.len() * per_shape);
    for (s, shape) in shapes.iter().enumerate() {
        for rep in 0..per_shape {
            let sub = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((s * 1009 + rep) as u64);
            let mut sample = sample_pair(shape, n, ratio, sub)?;
            if per_shape > 1 {
                sample.name = format!("{}_{rep}", sample.name);
            }
            out.push(sample);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_points_on_surface() {
        let s = sample_pair(&SyntheticShape::Sphere { radius: 1.0 }, 32, 4, 3).unwrap();
        for p in s.gt.points().iter().chain(s.input.points()) {
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn all_shapes_sample_on_surface_and_mesh() {
        for shape in SyntheticShape::standard_set() {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            for p in shape.sample(500, &mut rng) {
                assert!(shape.surface_distance(&p) <= 1e-12, "{shape}: {p:?}");
            }
            let mesh = shape.mesh().unwrap();
            for v in mesh.vertices() {
                assert!(shape.surface_distance(v) <= 1e-12, "{shape} vertex {v:?}");
            }
        }
    }

    #[test]
    fn counts_and_determinism() {
        let shape: SyntheticShape = "torus".parse().unwrap();
        let a = sample_pair(&shape, 16, 4, 9).unwrap();
        assert_eq!((a.input.len(), a.gt.len()), (16, 64));
        assert_eq!(a, sample_pair(&shape, 16, 4, 9).unwrap());
        assert_ne!(a.gt, sample_pair(&shape, 16, 4, 10).unwrap().gt);
    }

    #[test]
    fn invalid_requests() {
        let bad = SyntheticShape::Torus { major: 0.2, minor: 0.5 };
        assert!(sample_pair(&bad, 16, 4, 0).is_err());
        assert!(sample_pair(&SyntheticShape::Sphere { radius: 1.0 }, 4, 4, 0).is_err());
        assert!("cube".parse::<SyntheticShape>().is_err());
    }
}
