//! Numerical toolkit for two-dimensional divergence-form elliptic operators
//!
//! ```text
//! L u = -div(A∇u + uB) + C·∇u + du
//! ```
//!
//! with a possibly non-symmetric principal part and integrable (not necessarily
//! bounded) lower-order coefficients.
//!
//! The crate builds two positive multipliers `m`, `w` on small disks, turns `L`
//! into a pure divergence operator `L̂ v = w L(m v)`, passes from `L̂ v = 0` to a
//! first-order complex Beltrami system for `f = v + iṽ`, and measures
//! unique-continuation quantities (vanishing order, doubling ratios,
//! three-spheres exponents) on discrete solutions.
//!
//! Layout:
//!
//! * [`mesh`]: structured disk triangulations, point location, quadrature, P1 functions.
//! * [`fields`]: coefficient sets `(A, B, C, d)` and their structural constants.
//! * [`operators`]: weak-form assembly, Dirichlet solves, the contraction iteration.
//! * [`reduction`]: the multipliers and the transformed coefficient sets.
//! * [`beltrami`]: stream function, dilatations, Cauchy transform, similarity factor.
//! * [`lab`]: experiment runner behind the `uc2d` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod beltrami;
pub mod error;
pub mod fields;
pub mod lab;
pub mod linalg;
pub mod mesh;
pub mod operators;
pub mod reduction;

pub use error::{Error, Result};

/// A point (or vector) in the plane. Coordinates are dimensionless.
pub type Point = nalgebra::Vector2<f64>;
/// A 2×2 real matrix.
pub type Mat2 = nalgebra::Matrix2<f64>;
pub use num_complex::Complex64;

/// The rotation `J = [[0, -1], [1, 0]]`.
pub fn rotation_j() -> Mat2 {
    Mat2::new(0.0, -1.0, 1.0, 0.0)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn sym_min_eigenvalue(a: &Mat2) -> f64 {
    let p = a[(0, 0)];
    let r = a[(1, 1)];
    let q = 0.5 * (a[(0, 1)] + a[(1, 0)]);
    0.5 * (p + r) - (0.25 * (p - r) * (p - r) + q * q).sqrt()
}
