use super::{Disk, Mesh};
use crate::{Error, Point, Result};

/// A quadrature node in barycentric coordinates with its weight relative to
/// the triangle area.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

const fn qp(a: f64, b: f64, c: f64, weight: f64) -> QuadPoint {
    QuadPoint {
        bary: [a, b, c],
        weight,
    }
}

/// Mid-edge rule, exact for quadratics.
pub const MID_EDGE: [QuadPoint; 3] = [
    qp(0.5, 0.5, 0.0, 1.0 / 3.0),
    qp(0.0, 0.5, 0.5, 1.0 / 3.0),
    qp(0.5, 0.0, 0.5, 1.0 / 3.0),
];

/// Interior three-point Gauss rule, exact for quadratics. Its nodes never sit
/// on an edge, so element-wise quantities are unambiguous there.
pub const GAUSS_INTERIOR: [QuadPoint; 3] = [
    qp(2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0),
    qp(1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0),
    qp(1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0),
];

/// Centroids of the 16 congruent sub-triangles of a 4×4 refinement.
pub const SUBSAMPLE_16: [QuadPoint; 16] = subsample_16();

const fn subsample_16() -> [QuadPoint; 16] {
    let mut out = [qp(0.0, 0.0, 0.0, 0.0); 16];
    let mut k = 0;
    let mut j = 0;
    while j < 4 {
        let mut i = 0;
        while i + j < 4 {
            let l1 = (i as f64 + 1.0 / 3.0) / 4.0;
            let l2 = (j as f64 + 1.0 / 3.0) / 4.0;
            out[k] = qp(1.0 - l1 - l2, l1, l2, 1.0 / 16.0);
            k += 1;
            if i + j < 3 {
                let l1 = (i as f64 + 2.0 / 3.0) / 4.0;
                let l2 = (j as f64 + 2.0 / 3.0) / 4.0;
                out[k] = qp(1.0 - l1 - l2, l1, l2, 1.0 / 16.0);
                k += 1;
            }
            i += 1;
        }
        j += 1;
    }
    out
}

fn segment_distance(x: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let t = ((x - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (x - (a + ab * t)).norm()
}

impl Mesh {
    fn check_subdisk(&self, disk: &Disk) -> Result<()> {
        let reach = (disk.center - self.center).norm() + disk.radius;
        if !(disk.radius > 0.0) || reach > self.radius * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "subdisk of radius {} at ({}, {}) is not contained in the mesh disk",
                disk.radius, disk.center.x, disk.center.y
            )));
        }
        Ok(())
    }

    /// Quadrature over `B_r ∩ mesh`, calling `g(triangle, barycentric, point)`
    /// at every node. Triangles inside the subdisk use the mid-edge rule;
    /// triangles cut by its circle use 16-point subsampling with an
    /// inside-indicator.
    pub fn integrate_with<G>(&self, disk: &Disk, mut g: G) -> Result<f64>
    where
        G: FnMut(usize, [f64; 3], Point) -> f64,
    {
        self.check_subdisk(disk)?;
        let r = disk.radius;
        let tol = r * 1e-12;
        let mut total = 0.0;
        for (tri, t) in self.triangles.iter().enumerate() {
            let p = t.map(|k| self.vertices[k]);
            let far = p.iter().map(|v| (v - disk.center).norm()).fold(0.0_f64, f64::max);
            let area = self.areas[tri];
            if far <= r + tol {
                for q in &MID_EDGE {
                    total += q.weight * area * g(tri, q.bary, self.point_at(tri, q.bary));
                }
                continue;
            }
            let inside_tri = {
                let b = self.barycentric(tri, &disk.center);
                b.iter().all(|&c| c >= 0.0)
            };
            let near = segment_distance(&disk.center, &p[0], &p[1])
                .min(segment_distance(&disk.center, &p[1], &p[2]))
                .min(segment_distance(&disk.center, &p[2], &p[0]));
            if !inside_tri && near >= r {
                continue;
            }
            for q in &SUBSAMPLE_16 {
                let x = self.point_at(tri, q.bary);
                if (x - disk.center).norm() <= r {
                    total += q.weight * area * g(tri, q.bary, x);
                }
            }
        }
        Ok(total)
    }

    /// Approximates `∫_{B_r} g` for a pointwise function `g`.
    pub fn integrate<G>(&self, g: G, disk: &Disk) -> Result<f64>
    where
        G: Fn(Point) -> f64,
    {
        self.integrate_with(disk, |_, _, x| g(x))
    }

    /// Quadrature over the whole mesh with the given rule.
    pub fn integrate_elements<G>(&self, rule: &[QuadPoint], mut g: G) -> f64
    where
        G: FnMut(usize, [f64; 3], Point) -> f64,
    {
        let mut total = 0.0;
        for tri in 0..self.triangle_count() {
            let area = self.areas[tri];
            for q in rule {
                total += q.weight * area * g(tri, q.bary, self.point_at(tri, q.bary));
            }
        }
        total
    }
}
