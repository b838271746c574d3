//! From `L̂v = 0` to the complex first-order system
//!
//! ```text
//! f_z̄ = μ f_z + ν conj(f_z) + α f + β conj(f),   f = v + iṽ,
//! ```
//!
//! where `ṽ` is the stream function of the flux `Â∇v + vB̂`.

mod algebra;
mod cauchy;
mod similarity;
mod stream;

use std::sync::Arc;

pub use algebra::{dilatations, lower_order_coefficients, real_linear_parts};
pub use cauchy::{beurling, cauchy_transform, CauchyTransform, GridField, PeriodicGrid};
pub use similarity::{similarity_factor, similarity_factor_with, HolderReport, SimilarityFactor, SimilarityOptions};
pub use stream::{stream_function, StreamFunction, MAX_STREAM_DEFECT};

use crate::fields::{MatrixField, VectorField};
use crate::mesh::{Disk, ElementField, FemFunction, Mesh, GAUSS_INTERIOR, SUBSAMPLE_16};
use crate::operators::{assemble, solve_dirichlet, OperatorKind, RhsData};
use crate::reduction::ReductionResult;
use crate::{Complex64, Error, Point, Result};

/// A complex coefficient field.
pub type ComplexField = Arc<dyn Fn(Point) -> Complex64 + Send + Sync>;

/// `f = v + iṽ` together with the coefficients of its Beltrami system.
#[derive(Clone)]
pub struct BeltramiData {
    pub f: FemFunction<Complex64>,
    pub mu: ComplexField,
    pub nu: ComplexField,
    pub alpha: ComplexField,
    pub beta: ComplexField,
    /// `max(|μ| + |ν|)` over the quadrature nodes of `f`'s mesh.
    pub k_bound: f64,
    pub s: Option<FemFunction<Complex64>>,
}

impl std::fmt::Debug for BeltramiData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BeltramiData")
            .field("vertices", &self.f.values().len())
            .field("k_bound", &self.k_bound)
            .field("s", &self.s.is_some())
            .finish_non_exhaustive()
    }
}

impl BeltramiData {
    /// Assembles the data from explicit fields; fails unless `|μ| + |ν| < 1`
    /// at every quadrature node.
    pub fn from_fields(
        f: FemFunction<Complex64>,
        mu: ComplexField,
        nu: ComplexField,
        alpha: ComplexField,
        beta: ComplexField,
    ) -> Result<Self> {
        let mesh = Arc::clone(f.mesh());
        let mut k_bound: f64 = 0.0;
        for tri in 0..mesh.triangle_count() {
            for q in &GAUSS_INTERIOR {
                let x = mesh.point_at(tri, q.bary);
                let k = mu(x).norm() + nu(x).norm();
                if !(k < 1.0) {
                    return Err(Error::Degenerate(format!("|μ| + |ν| = {k} ≥ 1 at ({}, {})", x.x, x.y)));
                }
                k_bound = k_bound.max(k);
            }
        }
        Ok(BeltramiData {
            f,
            mu,
            nu,
            alpha,
            beta,
            k_bound,
            s: None,
        })
    }

    /// Dilatations and lower-order coefficients of `(Â, B̂)` for a given `f`.
    pub fn from_hat(f: FemFunction<Complex64>, a_hat: &MatrixField, b_hat: &VectorField) -> Result<Self> {
        let (a1, a2) = (Arc::clone(a_hat), Arc::clone(a_hat));
        let (a3, b3) = (Arc::clone(a_hat), Arc::clone(b_hat));
        let (a4, b4) = (Arc::clone(a_hat), Arc::clone(b_hat));
        Self::from_fields(
            f,
            Arc::new(move |x| dilatations(&a1(x)).0),
            Arc::new(move |x| dilatations(&a2(x)).1),
            Arc::new(move |x| lower_order_coefficients(&a3(x), &b3(x)).0),
            Arc::new(move |x| lower_order_coefficients(&a4(x), &b4(x)).1),
        )
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.f.mesh()
    }

    /// `Re f`.
    pub fn v(&self) -> FemFunction {
        self.f.map(|z| z.re)
    }

    /// `Im f`.
    pub fn v_tilde(&self) -> FemFunction {
        self.f.map(|z| z.im)
    }
}

/// Element-wise Wirtinger derivatives `(g_z, g_z̄)` of a P1 function.
pub fn wirtinger(g: &FemFunction<Complex64>) -> (ElementField<Complex64>, ElementField<Complex64>) {
    let mesh = g.mesh();
    let values = g.values();
    let i = Complex64::i();
    let (mut gz, mut gzb) = (Vec::new(), Vec::new());
    for (tri, verts) in mesh.triangles().iter().enumerate() {
        let grads = mesh.basis_gradients(tri);
        let mut dx = Complex64::new(0.0, 0.0);
        let mut dy = Complex64::new(0.0, 0.0);
        for (k, &v) in verts.iter().enumerate() {
            dx += values[v] * grads[k].x;
            dy += values[v] * grads[k].y;
        }
        gz.push((dx - i * dy) * 0.5);
        gzb.push((dx + i * dy) * 0.5);
    }
    (ElementField { values: gz }, ElementField { values: gzb })
}

/// `‖f_z̄ − μf_z − ν conj(f_z) − αf − β conj(f)‖_{L²} / ‖|f_z̄| + |f|‖_{L²}`
/// over the mesh disk.
pub fn beltrami_residual(data: &BeltramiData) -> f64 {
    beltrami_residual_on(data, &data.mesh().disk())
}

/// [`beltrami_residual`] restricted to the elements whose centroid lies in
/// `disk`. Each element is sampled at 16 points so that singular
/// coefficients are resolved.
pub fn beltrami_residual_on(data: &BeltramiData, disk: &Disk) -> f64 {
    let mesh = data.mesh();
    let (fz, fzb) = wirtinger(&data.f);
    let (mut num, mut den) = (0.0, 0.0);
    for tri in 0..mesh.triangle_count() {
        if !disk.contains(&mesh.centroid(tri)) {
            continue;
        }
        let area = mesh.area(tri);
        let (dz, dzb) = (fz.values[tri], fzb.values[tri]);
        for q in &SUBSAMPLE_16 {
            let x = mesh.point_at(tri, q.bary);
            let f = data.f.eval_in(tri, q.bary);
            let r =
                dzb - (data.mu)(x) * dz - (data.nu)(x) * dz.conj() - (data.alpha)(x) * f - (data.beta)(x) * f.conj();
            let w = q.weight * area;
            num += w * r.norm_sqr();
            den += w * (dzb.norm() + f.norm()).powi(2);
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// The solution of `L̂v = 0` on the reduction mesh with boundary data
/// `x₁ − c₁`, where `c` is the disk center.
pub fn solve_hat(result: &ReductionResult) -> Result<FemFunction> {
    let mesh = result.mesh();
    let op = assemble(mesh, &result.hat_set(), OperatorKind::Lhat)?;
    let c = mesh.center();
    let g = FemFunction::interpolate(Arc::clone(mesh), |x| x.x - c.x);
    solve_dirichlet(&op, &RhsData::default().with_boundary(g))
}

/// `v`, its stream function normalized at the disk center, and the
/// resulting Beltrami data.
pub fn beltrami_from_reduction(result: &ReductionResult) -> Result<(BeltramiData, StreamFunction)> {
    let v = solve_hat(result)?;
    let x0 = result.mesh().center();
    let stream = stream_function(&v, &result.a_hat, &result.b_hat, &x0)?;
    let f = FemFunction::new(
        Arc::clone(v.mesh()),
        v.values()
            .iter()
            .zip(stream.values.values())
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect(),
    )?;
    let data = BeltramiData::from_hat(f, &result.a_hat, &result.b_hat)?;
    Ok((data, stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    fn zero() -> ComplexField {
        Arc::new(|_| Complex64::new(0.0, 0.0))
    }

    fn mesh(n: usize) -> Arc<Mesh> {
        Arc::new(build_disk_mesh(Point::zeros(), 1.0, n).unwrap())
    }

    #[test]
    fn wirtinger_of_affine_maps() {
        let m = mesh(8);
        let z = FemFunction::interpolate(Arc::clone(&m), |x| Complex64::new(x.x, x.y));
        let (gz, gzb) = wirtinger(&z);
        assert!(gz.values.iter().all(|v| (v - 1.0).norm() < 1e-12));
        assert!(gzb.values.iter().all(|v| v.norm() < 1e-12));
        let zb = z.map(|v| v.conj());
        let (gz, gzb) = wirtinger(&zb);
        assert!(gz.values.iter().all(|v| v.norm() < 1e-12));
        assert!(gzb.values.iter().all(|v| (v - 1.0).norm() < 1e-12));
    }

    #[test]
    fn wirtinger_of_modulus_squared_is_first_order() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let m = mesh(n);
            let g = FemFunction::interpolate(Arc::clone(&m), |x| Complex64::new(x.norm_squared(), 0.0));
            let (gz, gzb) = wirtinger(&g);
            let mut err = 0.0;
            for t in 0..m.triangle_count() {
                let c = m.centroid(t);
                let z = Complex64::new(c.x, c.y);
                err += m.area(t) * ((gz.values[t] - z.conj()).norm_sqr() + (gzb.values[t] - z).norm_sqr());
            }
            errs.push(err.sqrt());
        }
        assert!(errs[0] < 0.1);
        assert!(errs[2] <= errs[0], "{errs:?}");
    }

    #[test]
    fn holomorphic_data_has_zero_residual() {
        let m = mesh(16);
        let z = FemFunction::interpolate(Arc::clone(&m), |x| Complex64::new(x.x, x.y));
        let data = BeltramiData::from_fields(z, zero(), zero(), zero(), zero()).unwrap();
        assert!(beltrami_residual(&data) < 1e-12);
        assert_eq!(data.k_bound, 0.0);
    }

    #[test]
    fn rejects_non_elliptic_dilatations() {
        let m = mesh(4);
        let z = FemFunction::interpolate(Arc::clone(&m), |x| Complex64::new(x.x, x.y));
        let big: ComplexField = Arc::new(|_| Complex64::new(0.6, 0.0));
        assert!(BeltramiData::from_fields(z, Arc::clone(&big), big, zero(), zero()).is_err());
    }

    #[test]
    fn constant_drift_manufactured_solution() {
        // Â = I, B̂ = b: v = e^{β·x} solves −div(∇v + vb) = 0 iff β·(β + b) = 0,
        // which also makes J(β + b)v a gradient.
        let b = Point::new(0.6, -0.2);
        let beta = (crate::rotation_j() * b - b) * 0.5;
        assert!(beta.dot(&(beta + b)).abs() < 1e-15);
        let a_hat = crate::fields::constant_matrix(crate::Mat2::identity());
        let b_hat = crate::fields::constant_vector(b);
        let mut res = Vec::new();
        for n in [16, 32, 64] {
            let m = mesh(n);
            let v = FemFunction::interpolate(Arc::clone(&m), |x| (beta.dot(&x)).exp());
            let s = stream_function(&v, &a_hat, &b_hat, &m.center()).unwrap();
            let f = FemFunction::new(
                Arc::clone(&m),
                v.values()
                    .iter()
                    .zip(s.values.values())
                    .map(|(&a, &b)| Complex64::new(a, b))
                    .collect(),
            )
            .unwrap();
            let data = BeltramiData::from_hat(f, &a_hat, &b_hat).unwrap();
            res.push(beltrami_residual(&data));
        }
        assert!(res[0] / res[1] >= 1.5 && res[1] / res[2] >= 1.5, "{res:?}");
    }
}
