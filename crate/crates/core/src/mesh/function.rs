use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use super::{Disk, Mesh};
use crate::{Complex64, Error, Point, Result};

/// Nodal value type of a P1 function: `f64` or [`Complex64`].
pub trait Scalar:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + std::fmt::Debug
{
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// A continuous piecewise-linear function given by its vertex values.
#[derive(Debug, Clone)]
pub struct FemFunction<T: Scalar = f64> {
    mesh: Arc<Mesh>,
    values: Vec<T>,
}

impl<T: Scalar> FemFunction<T> {
    pub fn new(mesh: Arc<Mesh>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.vertex_count() {
            return Err(Error::invalid(format!(
                "{} nodal values for {} vertices",
                values.len(),
                mesh.vertex_count()
            )));
        }
        Ok(FemFunction { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![T::default(); mesh.vertex_count()];
        FemFunction { mesh, values }
    }

    /// Nodal interpolant of `g`.
    pub fn interpolate(mesh: Arc<Mesh>, g: impl Fn(Point) -> T) -> Self {
        let values = mesh.vertices().iter().map(|&x| g(x)).collect();
        FemFunction { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Value inside triangle `tri` at barycentric coordinates `bary`.
    pub fn eval_in(&self, tri: usize, bary: [f64; 3]) -> T {
        let [a, b, c] = self.mesh.triangles()[tri];
        self.values[a] * bary[0] + self.values[b] * bary[1] + self.values[c] * bary[2]
    }

    /// Value at `x`, or `None` outside the triangulation.
    pub fn eval(&self, x: &Point) -> Option<T> {
        self.mesh.locate(x).map(|(tri, bary)| self.eval_in(tri, bary))
    }

    /// Value at `x`; points in the boundary layer use the nearest triangle.
    pub fn eval_clamped(&self, x: &Point) -> T {
        let (tri, bary) = self.mesh.locate_clamped(x);
        self.eval_in(tri, bary)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> FemFunction<U> {
        FemFunction {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// `(∫_{B_r} |u|²)^{1/2}`.
    pub fn l2_norm_on(&self, disk: &Disk) -> Result<f64> {
        let sq = self.mesh.integrate_with(disk, |tri, bary, _| {
            let v = self.eval_in(tri, bary).modulus();
            v * v
        })?;
        Ok(sq.sqrt())
    }

    /// Maximum of `|u|` over the vertices inside the disk.
    pub fn linf_norm_on(&self, disk: &Disk) -> f64 {
        self.mesh
            .vertices()
            .iter()
            .zip(&self.values)
            .filter(|(x, _)| (*x - disk.center).norm() <= disk.radius * (1.0 + 1e-12))
            .map(|(_, v)| v.modulus())
            .fold(0.0, f64::max)
    }
}

impl FemFunction<f64> {
    /// Gradient on triangle `tri` (constant for P1).
    pub fn gradient_in(&self, tri: usize) -> Point {
        let g = self.mesh.basis_gradients(tri);
        let [a, b, c] = self.mesh.triangles()[tri];
        g[0] * self.values[a] + g[1] * self.values[b] + g[2] * self.values[c]
    }

    pub fn element_gradients(&self) -> ElementField<Point> {
        ElementField {
            values: (0..self.mesh.triangle_count()).map(|t| self.gradient_in(t)).collect(),
        }
    }

    /// Element gradients averaged onto the vertices with area weights.
    pub fn recovered_gradient(&self) -> RecoveredGradient {
        let per_tri = self.element_gradients().values;
        RecoveredGradient {
            mesh: Arc::clone(&self.mesh),
            values: self.mesh.average_to_vertices(&per_tri),
        }
    }

    /// `‖∇u‖_{L^p}` over the whole mesh.
    pub fn gradient_lp_norm(&self, p: f64) -> f64 {
        (0..self.mesh.triangle_count())
            .map(|t| self.mesh.area(t) * self.gradient_in(t).norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// Discrete `W^{1,2}` seminorm `‖∇u‖_{L²}`.
    pub fn h1_seminorm(&self) -> f64 {
        self.gradient_lp_norm(2.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A vector field with one value per vertex, interpolated linearly; used for
/// gradients recovered from element-wise P1 gradients.
#[derive(Debug, Clone)]
pub struct RecoveredGradient {
    mesh: Arc<Mesh>,
    values: Vec<Point>,
}

impl RecoveredGradient {
    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn eval_clamped(&self, x: &Point) -> Point {
        let (tri, bary) = self.mesh.locate_clamped(x);
        let [a, b, c] = self.mesh.triangles()[tri];
        self.values[a] * bary[0] + self.values[b] * bary[1] + self.values[c] * bary[2]
    }
}

/// One value per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementField<T> {
    pub values: Vec<T>,
}

impl ElementField<Point> {
    /// `(∫ |G|^p)^{1/p}` over the mesh.
    pub fn lp_norm(&self, mesh: &Mesh, p: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(t, g)| mesh.area(t) * g.norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}
