//! Coefficient data `(A, B, C, d)` of
//! `L u = -div(A∇u + uB) + C·∇u + du` and the structural constants `K`, `κ`.

mod builtin;
mod raster;

use std::sync::Arc;

pub use builtin::{builtin, BUILTIN_NAMES};
pub use raster::{Raster, COEFFICIENT_CHANNELS};

use crate::mesh::{Disk, Mesh, MID_EDGE};
use crate::{sym_min_eigenvalue, Error, Mat2, Point, Result};

pub type MatrixField = Arc<dyn Fn(Point) -> Mat2 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

pub fn constant_matrix(a: Mat2) -> MatrixField {
    Arc::new(move |_| a)
}

pub fn constant_vector(b: Point) -> VectorField {
    Arc::new(move |_| b)
}

pub fn constant_scalar(d: f64) -> ScalarField {
    Arc::new(move |_| d)
}

/// The coefficients of one operator together with the integrability exponent
/// `q > 2` of its lower-order terms.
#[derive(Clone)]
pub struct CoefficientSet {
    pub name: String,
    pub a: MatrixField,
    pub b: VectorField,
    pub c: VectorField,
    pub d: ScalarField,
    pub q: f64,
    pub declared_k: Option<f64>,
    pub declared_kappa: Option<f64>,
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("q", &self.q)
            .field("declared_k", &self.declared_k)
            .field("declared_kappa", &self.declared_kappa)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    /// Principal part `a` with all lower-order terms zero and `q = 4`.
    pub fn principal(name: impl Into<String>, a: MatrixField) -> Self {
        CoefficientSet {
            name: name.into(),
            a,
            b: constant_vector(Point::zeros()),
            c: constant_vector(Point::zeros()),
            d: constant_scalar(0.0),
            q: 4.0,
            declared_k: None,
            declared_kappa: None,
        }
    }

    pub fn with_b(mut self, b: VectorField) -> Self {
        self.b = b;
        self
    }

    pub fn with_c(mut self, c: VectorField) -> Self {
        self.c = c;
        self
    }

    pub fn with_d(mut self, d: ScalarField) -> Self {
        self.d = d;
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    /// The same set with the drift vector `B` replaced by zero.
    pub fn without_b(&self) -> Self {
        self.clone().with_b(constant_vector(Point::zeros()))
    }

    /// The adjoint data `(Aᵀ, C, B, d)`.
    pub fn adjoint(&self) -> Self {
        let a = Arc::clone(&self.a);
        CoefficientSet {
            name: format!("{}_adjoint", self.name),
            a: Arc::new(move |x| a(x).transpose()),
            b: Arc::clone(&self.c),
            c: Arc::clone(&self.b),
            ..self.clone()
        }
    }

    /// Lower-order data scaled by `factor`: `(A, λB, λC, λd)`.
    pub fn scale_lower_order(&self, factor: f64) -> Self {
        let (b, c, d) = (Arc::clone(&self.b), Arc::clone(&self.c), Arc::clone(&self.d));
        CoefficientSet {
            name: format!("{}_x{factor}", self.name),
            b: Arc::new(move |x| b(x) * factor),
            c: Arc::new(move |x| c(x) * factor),
            d: Arc::new(move |x| d(x) * factor),
            declared_kappa: self.declared_kappa.map(|k| k * factor.abs()),
            ..self.clone()
        }
    }

    /// Estimates `K` on the mid-edge quadrature points of `mesh` and checks a
    /// declared value, if any.
    pub fn estimate_k(&self, mesh: &Mesh) -> Result<f64> {
        let k = check_ellipticity(&*self.a, &quadrature_points(mesh))?;
        if let Some(declared) = self.declared_k {
            if k > declared * 1.01 {
                return Err(Error::MisdeclaredConstant {
                    name: "K",
                    declared,
                    estimate: k,
                });
            }
        }
        Ok(k)
    }

    /// Estimates `κ` over the mesh disk and checks a declared value, if any.
    pub fn estimate_kappa(&self, mesh: &Mesh) -> Result<f64> {
        let kappa = lower_order_norms(self, mesh, &mesh.disk())?;
        if let Some(declared) = self.declared_kappa {
            if kappa > declared * 1.01 {
                return Err(Error::MisdeclaredConstant {
                    name: "kappa",
                    declared,
                    estimate: kappa,
                });
            }
        }
        Ok(kappa)
    }
}

/// All mid-edge quadrature points of the mesh (shared edges repeat).
pub fn quadrature_points(mesh: &Mesh) -> Vec<Point> {
    (0..mesh.triangle_count())
        .flat_map(|t| MID_EDGE.iter().map(move |q| mesh.point_at(t, q.bary)))
        .collect()
}

/// Smallest `K ≥ 1` with `A ξ·ξ ≥ K⁻¹|ξ|²` and `A⁻¹ξ·ξ ≥ K⁻¹|ξ|²` at every sample.
pub fn check_ellipticity(a: &(dyn Fn(Point) -> Mat2 + Send + Sync), samples: &[Point]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no sample points for the ellipticity check"));
    }
    let mut k: f64 = 1.0;
    for &x in samples {
        k = k.max(pointwise_k(&a(x)).map_err(|detail| Error::NonElliptic { point: x, detail })?);
    }
    Ok(k)
}

/// `K` of a single matrix.
pub fn pointwise_k(a: &Mat2) -> Result<f64, String> {
    if !a.iter().all(|v| v.is_finite()) {
        return Err("non-finite entry".into());
    }
    let lam = sym_min_eigenvalue(a);
    if !(lam > 0.0) {
        return Err(format!("symmetric part has eigenvalue {lam}"));
    }
    let inv = a.try_inverse().ok_or_else(|| "singular matrix".to_string())?;
    let lam_inv = sym_min_eigenvalue(&inv);
    if !(lam_inv > 0.0) {
        return Err(format!("symmetric part of the inverse has eigenvalue {lam_inv}"));
    }
    Ok((1.0 / lam).max(1.0 / lam_inv).max(1.0))
}

/// `‖B‖_{L^q} + ‖C‖_{L^q} + ‖d‖_{L^{q/2}}` over `disk`.
pub fn lower_order_norms(coeffs: &CoefficientSet, mesh: &Mesh, disk: &Disk) -> Result<f64> {
    let q = coeffs.q;
    if !(q > 2.0) {
        return Err(Error::invalid(format!("q must exceed 2, got {q}")));
    }
    let b = mesh.integrate(|x| (coeffs.b)(x).norm().powf(q), disk)?;
    let c = mesh.integrate(|x| (coeffs.c)(x).norm().powf(q), disk)?;
    let d = mesh.integrate(|x| (coeffs.d)(x).abs().powf(q / 2.0), disk)?;
    Ok(b.powf(1.0 / q) + c.powf(1.0 / q) + d.powf(2.0 / q))
}
