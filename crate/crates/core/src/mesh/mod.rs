//! Structured triangulations of disks.
//!
//! A uniform `n × n` grid on the square `[-1, 1]²` is mapped onto the unit
//! disk by the radial stretch `q ↦ q · max(|q₁|, |q₂|) / |q|`, then scaled and
//! translated. Each square cell is split along the diagonal pointing away
//! from the center, which keeps the corner cells well shaped.

mod function;
mod quadrature;

pub use function::{ElementField, FemFunction, RecoveredGradient, Scalar};
pub use quadrature::{QuadPoint, GAUSS_INTERIOR, MID_EDGE, SUBSAMPLE_16};

use crate::{Error, Point, Result};

/// Barycentric tolerance accepted by [`Mesh::locate`] before clamping.
const BARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    center: Point,
    radius: f64,
    resolution: usize,
    areas: Vec<f64>,
    /// Gradients of the three barycentric basis functions per triangle.
    basis_grads: Vec<[Point; 3]>,
}

/// A disk `B_r(center)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point, radius: f64) -> Self {
        Disk { center, radius }
    }

    pub fn contains(&self, x: &Point) -> bool {
        (x - self.center).norm() <= self.radius
    }
}

/// Builds the structured triangulation of `B_radius(center)` with
/// `resolution` cells across the diameter.
pub fn build_disk_mesh(center: Point, radius: f64, resolution: usize) -> Result<Mesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    if resolution < 4 {
        return Err(Error::invalid(format!(
            "resolution must be at least 4, got {resolution}"
        )));
    }
    let n = resolution;
    let side = n + 1;
    let mut vertices = Vec::with_capacity(side * side);
    let mut boundary = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            let q = Point::new(square_coord(i, n), square_coord(j, n));
            vertices.push(center + radius * square_to_disk(q));
            boundary.push(i == 0 || j == 0 || i == n || j == n);
        }
    }
    let index = |i: usize, j: usize| j * side + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1));
            let ac = square_coord(i, n) + 1.0 / n as f64;
            let bc = square_coord(j, n) + 1.0 / n as f64;
            if ac * bc > 0.0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    let mut areas = Vec::with_capacity(triangles.len());
    let mut basis_grads = Vec::with_capacity(triangles.len());
    for t in &triangles {
        let [p0, p1, p2] = t.map(|k| vertices[k]);
        let det = (p1 - p0).perp(&(p2 - p0));
        debug_assert!(det > 0.0);
        areas.push(0.5 * det);
        basis_grads.push([
            Point::new(p1.y - p2.y, p2.x - p1.x) / det,
            Point::new(p2.y - p0.y, p0.x - p2.x) / det,
            Point::new(p0.y - p1.y, p1.x - p0.x) / det,
        ]);
    }
    Ok(Mesh {
        vertices,
        triangles,
        boundary,
        center,
        radius,
        resolution,
        areas,
        basis_grads,
    })
}

fn square_coord(i: usize, n: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / n as f64
}

fn square_to_disk(q: Point) -> Point {
    let len = q.norm();
    if len == 0.0 {
        return q;
    }
    q * (q.x.abs().max(q.y.abs()) / len)
}

fn disk_to_square(p: Point) -> Point {
    let m = p.x.abs().max(p.y.abs());
    if m == 0.0 {
        return p;
    }
    p * (p.norm() / m)
}

impl Mesh {
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, vertex: usize) -> bool {
        self.boundary[vertex]
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn disk(&self) -> Disk {
        Disk::new(self.center, self.radius)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Nominal mesh width `2·radius / resolution`.
    pub fn mesh_size(&self) -> f64 {
        2.0 * self.radius / self.resolution as f64
    }

    pub fn area(&self, tri: usize) -> f64 {
        self.areas[tri]
    }

    /// Gradients of the barycentric basis functions of triangle `tri`.
    pub fn basis_gradients(&self, tri: usize) -> &[Point; 3] {
        &self.basis_grads[tri]
    }

    /// Signed area of triangle `tri`, recomputed from its vertices.
    pub fn signed_area(&self, tri: usize) -> f64 {
        let [p0, p1, p2] = self.triangles[tri].map(|k| self.vertices[k]);
        0.5 * (p1 - p0).perp(&(p2 - p0))
    }

    pub fn centroid(&self, tri: usize) -> Point {
        let [p0, p1, p2] = self.triangles[tri].map(|k| self.vertices[k]);
        (p0 + p1 + p2) / 3.0
    }

    /// The point with barycentric coordinates `bary` in triangle `tri`.
    pub fn point_at(&self, tri: usize, bary: [f64; 3]) -> Point {
        let [p0, p1, p2] = self.triangles[tri].map(|k| self.vertices[k]);
        p0 * bary[0] + p1 * bary[1] + p2 * bary[2]
    }

    /// Indices of vertices not on the boundary circle.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&v| !self.boundary[v]).collect()
    }

    /// The vertex closest to `x`.
    pub fn nearest_vertex(&self, x: &Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, v) in self.vertices.iter().enumerate() {
            let d = (v - x).norm_squared();
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }

    fn barycentric(&self, tri: usize, x: &Point) -> [f64; 3] {
        let [p0, p1, p2] = self.triangles[tri].map(|k| self.vertices[k]);
        let det = (p1 - p0).perp(&(p2 - p0));
        let l1 = (x - p0).perp(&(p2 - p0)) / det;
        let l2 = (p1 - p0).perp(&(x - p0)) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    fn candidate_cells(&self, x: &Point) -> impl Iterator<Item = usize> + '_ {
        let n = self.resolution as isize;
        let q = disk_to_square((x - self.center) / self.radius);
        let cell = |t: f64| (((t + 1.0) * 0.5 * n as f64).floor() as isize).clamp(0, n - 1);
        let (ci, cj) = (cell(q.x), cell(q.y));
        (-1..=1).flat_map(move |dj| {
            (-1..=1).filter_map(move |di| {
                let (i, j) = (ci + di, cj + dj);
                (i >= 0 && j >= 0 && i < n && j < n).then(|| (j * n + i) as usize)
            })
        })
    }

    /// Best triangle among the cells around `x`: the one maximising the
    /// smallest barycentric coordinate.
    fn best_triangle(&self, x: &Point) -> (usize, [f64; 3]) {
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for cell in self.candidate_cells(x) {
            for tri in [2 * cell, 2 * cell + 1] {
                let bary = self.barycentric(tri, x);
                let worst = bary[0].min(bary[1]).min(bary[2]);
                if best.is_none_or(|b| worst > b.0) {
                    best = Some((worst, tri, bary));
                }
            }
        }
        let (_, tri, bary) = best.expect("mesh has at least one cell");
        (tri, bary)
    }

    /// Finds the triangle containing `x` and its barycentric coordinates,
    /// or `None` when `x` lies outside the triangulated polygon.
    pub fn locate(&self, x: &Point) -> Option<(usize, [f64; 3])> {
        if (x - self.center).norm() > self.radius * (1.0 + 1e-9) {
            return None;
        }
        let (tri, bary) = self.best_triangle(x);
        if bary.iter().any(|&b| b < -BARY_TOL) {
            return None;
        }
        Some((tri, clamp_bary(bary)))
    }

    /// Like [`Mesh::locate`], but points outside the polygon are projected
    /// onto the nearest triangle of their neighbourhood.
    pub fn locate_clamped(&self, x: &Point) -> (usize, [f64; 3]) {
        let (tri, bary) = self.best_triangle(x);
        (tri, clamp_bary(bary))
    }

    /// Area-weighted average of per-triangle vectors onto the vertices.
    pub fn average_to_vertices(&self, per_triangle: &[Point]) -> Vec<Point> {
        let mut acc = vec![Point::zeros(); self.vertex_count()];
        let mut weight = vec![0.0; self.vertex_count()];
        for (tri, t) in self.triangles.iter().enumerate() {
            for &v in t {
                acc[v] += per_triangle[tri] * self.areas[tri];
                weight[v] += self.areas[tri];
            }
        }
        acc.iter().zip(&weight).map(|(a, w)| a / *w).collect()
    }
}

fn clamp_bary(bary: [f64; 3]) -> [f64; 3] {
    let c = bary.map(|b| b.max(0.0));
    let s = c[0] + c[1] + c[2];
    c.map(|b| b / s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Mesh {
        build_disk_mesh(Point::zeros(), 1.0, n).unwrap()
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_disk_mesh(Point::zeros(), 0.0, 8).is_err());
        assert!(build_disk_mesh(Point::zeros(), -1.0, 8).is_err());
        assert!(build_disk_mesh(Point::zeros(), 1.0, 3).is_err());
    }

    #[test]
    fn triangles_positive_and_inside() {
        for n in [4, 5, 16, 33] {
            let mesh = unit(n);
            assert!(mesh.triangle_count() > 0);
            for t in 0..mesh.triangle_count() {
                assert!(mesh.signed_area(t) > 0.0, "n={n} tri={t}");
            }
            for (v, p) in mesh.vertices().iter().enumerate() {
                assert!(p.norm() <= 1.0 + 1e-12);
                if mesh.is_boundary(v) {
                    assert!((p.norm() - 1.0).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn vertex_count_scales_quadratically() {
        for n in [8, 16, 32] {
            let ratio = unit(2 * n).vertex_count() as f64 / unit(n).vertex_count() as f64;
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn affine_equivariance() {
        let a = build_disk_mesh(Point::new(1.0, 1.0), 0.5, 16).unwrap();
        let b = build_disk_mesh(Point::zeros(), 0.5, 16).unwrap();
        assert_eq!(a.triangles(), b.triangles());
        for (p, q) in a.vertices().iter().zip(b.vertices()) {
            assert!((p - q - Point::new(1.0, 1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn locate_vertices_and_centroids() {
        let mesh = unit(12);
        for (v, p) in mesh.vertices().iter().enumerate() {
            let (tri, bary) = mesh.locate(p).expect("vertex inside");
            let local = mesh.triangles()[tri].iter().position(|&k| k == v);
            let local = local.expect("vertex belongs to the located triangle");
            assert!((bary[local] - 1.0).abs() < 1e-12);
        }
        let c = mesh.centroid(0);
        let (tri, bary) = mesh.locate(&c).unwrap();
        assert_eq!(tri, 0);
        for b in bary {
            assert!((b - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(mesh.locate(&Point::new(2.0, 0.0)).is_none());
    }

    #[test]
    fn locate_reconstructs_points() {
        let mesh = build_disk_mesh(Point::new(0.3, -0.2), 0.7, 20).unwrap();
        for k in 0..500 {
            let t = k as f64 * 0.618_033_988;
            let r = 0.69 * ((k as f64 * 0.377).fract()).sqrt();
            let x = mesh.center() + r * Point::new(t.cos(), t.sin());
            let (tri, bary) = mesh.locate(&x).unwrap();
            assert!(bary.iter().all(|&b| b >= 0.0));
            assert!((bary.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((mesh.point_at(tri, bary) - x).norm() < 1e-10 * mesh.radius());
        }
    }
}
