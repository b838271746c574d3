//! Weak-form assembly of `L`, its principal part `L₀` and lower-order part
//! `M`, Dirichlet solves, and the fixed-point solver `u = L₀⁻¹(b − M u)`.

mod contraction;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use contraction::{contraction_iterate, estimate_contraction_norm, ContractionOutcome};

use crate::fields::{
    check_ellipticity, constant_scalar, constant_vector, quadrature_points, CoefficientSet, ScalarField, VectorField,
};
use crate::linalg::{norm2, LuFactorization, SparseMatrix};
use crate::mesh::{Disk, ElementField, FemFunction, Mesh, MID_EDGE};
use crate::{Error, Point, Result};

/// Which terms of the bilinear form are assembled. `Ltilde` and `Lhat` are
/// assembled like `L` from transformed coefficient sets; the tag records
/// their provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    L,
    L0,
    M,
    Ltilde,
    Lhat,
}

impl OperatorKind {
    fn principal(self) -> bool {
        self != OperatorKind::M
    }

    fn lower_order(self) -> bool {
        self != OperatorKind::L0
    }
}

/// An assembled bilinear form on the P1 space of a mesh. Row `i`, column `j`
/// holds `a(φⱼ, φᵢ)`.
#[derive(Debug, Clone)]
pub struct WeakOperator {
    mesh: Arc<Mesh>,
    matrix: SparseMatrix,
    kind: OperatorKind,
    boundary: Vec<usize>,
}

impl WeakOperator {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// Vertices carrying Dirichlet constraints.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// `a(u, φᵢ)` for every vertex `i`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.matvec(u)
    }

    /// Factorization of the interior block, reusable across right-hand sides.
    pub fn dirichlet_system(&self) -> Result<DirichletSystem> {
        DirichletSystem::new(self)
    }
}

/// Assembles the form of `kind` for `coeffs` with the mid-edge rule:
///
/// ```text
/// a(φⱼ, φᵢ) = ∫ A∇φⱼ·∇φᵢ + φⱼ B·∇φᵢ + φᵢ C·∇φⱼ + d φⱼ φᵢ
/// ```
pub fn assemble(mesh: &Arc<Mesh>, coeffs: &CoefficientSet, kind: OperatorKind) -> Result<WeakOperator> {
    if kind.principal() {
        check_ellipticity(&*coeffs.a, &quadrature_points(mesh))?;
    }
    let locals: Vec<[[f64; 3]; 3]> = (0..mesh.triangle_count())
        .into_par_iter()
        .map(|tri| element_matrix(mesh, coeffs, kind, tri))
        .collect();
    let mut triplets = Vec::with_capacity(9 * locals.len());
    for (tri, local) in locals.iter().enumerate() {
        let t = mesh.triangles()[tri];
        for (a, row) in local.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                triplets.push((t[a], t[b], v));
            }
        }
    }
    let boundary = (0..mesh.vertex_count()).filter(|&v| mesh.is_boundary(v)).collect();
    Ok(WeakOperator {
        mesh: Arc::clone(mesh),
        matrix: SparseMatrix::from_triplets(mesh.vertex_count(), triplets),
        kind,
        boundary,
    })
}

fn element_matrix(mesh: &Mesh, coeffs: &CoefficientSet, kind: OperatorKind, tri: usize) -> [[f64; 3]; 3] {
    let g = mesh.basis_gradients(tri);
    let area = mesh.area(tri);
    let mut out = [[0.0; 3]; 3];
    for q in &MID_EDGE {
        let x = mesh.point_at(tri, q.bary);
        let w = q.weight * area;
        let phi = q.bary;
        if kind.principal() {
            let a = (coeffs.a)(x);
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] += w * (a * g[j]).dot(&g[i]);
                }
            }
        }
        if kind.lower_order() {
            let (b, c, d) = ((coeffs.b)(x), (coeffs.c)(x), (coeffs.d)(x));
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] += w * (phi[j] * b.dot(&g[i]) + phi[i] * c.dot(&g[j]) + d * phi[i] * phi[j]);
                }
            }
        }
    }
    out
}

/// Stiffness matrix of the Laplacian, `∫ ∇φⱼ·∇φᵢ`.
pub fn stiffness(mesh: &Arc<Mesh>) -> SparseMatrix {
    let id = CoefficientSet::principal("laplacian", crate::fields::constant_matrix(crate::Mat2::identity()));
    assemble(mesh, &id, OperatorKind::L0)
        .expect("the identity is elliptic")
        .matrix
}

/// Right-hand side of `L u = −div F + f` with Dirichlet data.
#[derive(Clone)]
pub struct RhsData {
    pub flux: VectorField,
    pub source: ScalarField,
    /// `None` means homogeneous boundary values.
    pub boundary_values: Option<FemFunction>,
}

impl std::fmt::Debug for RhsData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RhsData")
            .field("boundary_values", &self.boundary_values.is_some())
            .finish_non_exhaustive()
    }
}

impl Default for RhsData {
    fn default() -> Self {
        RhsData {
            flux: constant_vector(Point::zeros()),
            source: constant_scalar(0.0),
            boundary_values: None,
        }
    }
}

impl RhsData {
    pub fn source(f: ScalarField) -> Self {
        RhsData {
            source: f,
            ..Default::default()
        }
    }

    pub fn flux(flux: VectorField) -> Self {
        RhsData {
            flux,
            ..Default::default()
        }
    }

    pub fn with_boundary(mut self, g: FemFunction) -> Self {
        self.boundary_values = Some(g);
        self
    }

    /// `∫ F·∇φᵢ + f φᵢ` for every vertex `i`.
    pub fn load_vector(&self, mesh: &Mesh) -> Vec<f64> {
        let locals: Vec<[f64; 3]> = (0..mesh.triangle_count())
            .into_par_iter()
            .map(|tri| {
                let g = mesh.basis_gradients(tri);
                let mut out = [0.0; 3];
                for q in &MID_EDGE {
                    let x = mesh.point_at(tri, q.bary);
                    let w = q.weight * mesh.area(tri);
                    let (flux, f) = ((self.flux)(x), (self.source)(x));
                    for i in 0..3 {
                        out[i] += w * (flux.dot(&g[i]) + f * q.bary[i]);
                    }
                }
                out
            })
            .collect();
        let mut load = vec![0.0; mesh.vertex_count()];
        for (tri, local) in locals.iter().enumerate() {
            for (k, &v) in mesh.triangles()[tri].iter().enumerate() {
                load[v] += local[k];
            }
        }
        load
    }

    fn boundary_vector(&self, mesh: &Arc<Mesh>) -> Result<Vec<f64>> {
        let mut g = vec![0.0; mesh.vertex_count()];
        if let Some(bv) = &self.boundary_values {
            if bv.values().len() != mesh.vertex_count() {
                return Err(Error::invalid("boundary values live on a different mesh"));
            }
            for (v, (gv, &b)) in g.iter_mut().zip(bv.values()).enumerate() {
                if mesh.is_boundary(v) {
                    *gv = b;
                }
            }
        }
        Ok(g)
    }
}

/// The interior block of an operator, factorized once.
#[derive(Debug)]
pub struct DirichletSystem {
    interior: Vec<usize>,
    block: SparseMatrix,
    lu: LuFactorization,
}

impl DirichletSystem {
    fn new(op: &WeakOperator) -> Result<Self> {
        let interior = op.mesh.interior_vertices();
        if interior.is_empty() {
            return Err(Error::invalid("mesh has no interior vertices"));
        }
        let block = op.matrix.restrict(&interior);
        let lu = block.factorize()?;
        Ok(DirichletSystem { interior, block, lu })
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn block(&self) -> &SparseMatrix {
        &self.block
    }

    /// Solves the interior system and checks the relative residual.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let x = self.lu.solve(rhs);
        check_residual(&self.block, &x, rhs)?;
        Ok(x)
    }

    /// Solves with the transposed interior block.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        self.lu.solve_transpose(rhs)
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&v| full[v]).collect()
    }

    /// Embeds interior values into a full vector that equals `outer` elsewhere.
    pub fn scatter(&self, interior: &[f64], outer: &[f64]) -> Vec<f64> {
        let mut out = outer.to_vec();
        for (&v, &x) in self.interior.iter().zip(interior) {
            out[v] = x;
        }
        out
    }
}

fn check_residual(block: &SparseMatrix, x: &[f64], rhs: &[f64]) -> Result<()> {
    let ax = block.matvec(x);
    let r: Vec<f64> = ax.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let scale = norm2(rhs);
    let rel = if scale > 0.0 { norm2(&r) / scale } else { norm2(&r) };
    if !(rel <= 1e-10) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverFailure {
            relative_residual: rel,
            detail: "constrained system is singular or ill-conditioned; the disk may be too large for coercivity"
                .into(),
        });
    }
    Ok(())
}

/// Solves `a(u, φᵢ) = ∫F·∇φᵢ + fφᵢ` for interior `i`, `u = g` on the boundary.
pub fn solve_dirichlet(op: &WeakOperator, rhs: &RhsData) -> Result<FemFunction> {
    let system = op.dirichlet_system()?;
    solve_with(op, &system, rhs)
}

pub(crate) fn solve_with(op: &WeakOperator, system: &DirichletSystem, rhs: &RhsData) -> Result<FemFunction> {
    let g = rhs.boundary_vector(&op.mesh)?;
    let load = rhs.load_vector(&op.mesh);
    let lifted = op.matrix.matvec(&g);
    let b: Vec<f64> = system.interior.iter().map(|&v| load[v] - lifted[v]).collect();
    let x = system.solve(&b)?;
    FemFunction::new(Arc::clone(&op.mesh), system.scatter(&x, &g))
}

/// `G = ∇N` elementwise, where `−ΔN = f` with `N = 0` on the mesh boundary,
/// so that `∫ G·∇φ = ∫ fφ` for every interior test function.
pub fn divergence_lift(f: ScalarField, mesh: &Arc<Mesh>) -> Result<ElementField<Point>> {
    let id = CoefficientSet::principal("laplacian", crate::fields::constant_matrix(crate::Mat2::identity()));
    let op = assemble(mesh, &id, OperatorKind::L0)?;
    let n = solve_dirichlet(&op, &RhsData::source(f))?;
    Ok(n.element_gradients())
}

/// Largest `|∫ G·∇φᵢ − ∫ fφᵢ|` over interior vertices, relative to the load.
pub fn divergence_residual(g: &ElementField<Point>, f: &ScalarField, mesh: &Mesh) -> f64 {
    let mut lhs = vec![0.0; mesh.vertex_count()];
    for (tri, t) in mesh.triangles().iter().enumerate() {
        let grads = mesh.basis_gradients(tri);
        for k in 0..3 {
            lhs[t[k]] += mesh.area(tri) * g.values[tri].dot(&grads[k]);
        }
    }
    let load = RhsData::source(Arc::clone(f)).load_vector(mesh);
    let interior = mesh.interior_vertices();
    let diff = interior.iter().map(|&v| (lhs[v] - load[v]).abs()).fold(0.0, f64::max);
    let scale = interior.iter().map(|&v| load[v].abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// `‖∇u‖_{L^p(B_ρ)} / (r^{2(1/p−1)} ‖u‖_{L²(B_r)})` on disks about the mesh center.
pub fn interior_gradient_ratio(u: &FemFunction, rho: f64, r: f64, p: f64) -> Result<f64> {
    let mesh = u.mesh();
    if !(0.0 < rho && rho < r && r <= mesh.radius() * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!(
            "need 0 < rho < r <= radius, got rho = {rho}, r = {r}"
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("p must be at least 1, got {p}")));
    }
    let grads = u.element_gradients();
    let inner = Disk::new(mesh.center(), rho);
    let grad_norm = mesh
        .integrate_with(&inner, |tri, _, _| grads.values[tri].norm().powf(p))?
        .powf(1.0 / p);
    let l2 = u.l2_norm_on(&Disk::new(mesh.center(), r.min(mesh.radius())))?;
    if l2 == 0.0 {
        return Err(Error::Degenerate("‖u‖_{L²(B_r)} vanishes".into()));
    }
    Ok(grad_norm / (r.powf(2.0 * (1.0 / p - 1.0)) * l2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin, constant_matrix};
    use crate::mesh::build_disk_mesh;
    use crate::Mat2;
    use std::collections::BTreeMap;

    fn unit(n: usize) -> Arc<Mesh> {
        Arc::new(build_disk_mesh(Point::zeros(), 1.0, n).unwrap())
    }

    fn identity() -> CoefficientSet {
        CoefficientSet::principal("id", constant_matrix(Mat2::identity()))
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let mesh = unit(16);
        let op = assemble(&mesh, &identity(), OperatorKind::L0).unwrap();
        for v in mesh.interior_vertices() {
            let s: f64 = op.matrix().row(v).map(|(_, x)| x).sum();
            assert!(s.abs() < 1e-10);
        }
        let a = op.matrix();
        assert!(a.max_abs_diff(&a.transpose()) <= 1e-12 * a.max_abs());
    }

    #[test]
    fn lower_order_part_vanishes_without_lower_order_terms() {
        let mesh = unit(8);
        let op = assemble(&mesh, &identity(), OperatorKind::M).unwrap();
        assert_eq!(op.matrix().max_abs(), 0.0);
    }

    #[test]
    fn l_is_l0_plus_m() {
        let mesh = unit(12);
        let set = builtin("full_lower_order", &BTreeMap::new()).unwrap();
        let l = assemble(&mesh, &set, OperatorKind::L).unwrap();
        let l0 = assemble(&mesh, &set, OperatorKind::L0).unwrap();
        let m = assemble(&mesh, &set, OperatorKind::M).unwrap();
        let n = mesh.vertex_count();
        let mut sum = Vec::new();
        for i in 0..n {
            sum.extend(l0.matrix().row(i).map(|(j, v)| (i, j, v)));
            sum.extend(m.matrix().row(i).map(|(j, v)| (i, j, v)));
        }
        let sum = SparseMatrix::from_triplets(n, sum);
        assert!(l.matrix().max_abs_diff(&sum) <= 1e-12 * l.matrix().max_abs());
    }

    #[test]
    fn non_elliptic_coefficients_are_rejected() {
        let mesh = unit(8);
        let bad = CoefficientSet::principal("bad", constant_matrix(Mat2::new(1.0, 0.0, 0.0, -1.0)));
        assert!(matches!(
            assemble(&mesh, &bad, OperatorKind::L),
            Err(Error::NonElliptic { .. })
        ));
    }

    #[test]
    fn radial_poisson_center_value() {
        let mesh = unit(64);
        let op = assemble(&mesh, &identity(), OperatorKind::L).unwrap();
        let u = solve_dirichlet(&op, &RhsData::source(constant_scalar(1.0))).unwrap();
        let center = u.eval(&Point::zeros()).unwrap();
        assert!((center - 0.25).abs() < 0.01 * 0.25, "{center}");
    }

    #[test]
    fn zero_data_gives_zero() {
        let mesh = unit(8);
        let op = assemble(&mesh, &identity(), OperatorKind::L).unwrap();
        let u = solve_dirichlet(&op, &RhsData::default()).unwrap();
        assert_eq!(u.max_modulus(), 0.0);
    }

    #[test]
    fn boundary_values_are_imposed() {
        let mesh = unit(16);
        let op = assemble(&mesh, &identity(), OperatorKind::L).unwrap();
        let g = FemFunction::interpolate(Arc::clone(&mesh), |x| 2.0 * x.x - x.y + 0.5);
        let u = solve_dirichlet(&op, &RhsData::default().with_boundary(g.clone())).unwrap();
        // affine functions are discrete harmonic
        for (a, b) in u.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_ratio_of_linear_function() {
        let mesh = unit(64);
        let u = FemFunction::interpolate(Arc::clone(&mesh), |x| x.x);
        let ratio = interior_gradient_ratio(&u, 0.5, 1.0, 4.0).unwrap();
        let q = std::f64::consts::PI / 4.0;
        let exact = q.powf(0.25) / q.sqrt();
        assert!((ratio - exact).abs() < 0.02 * exact, "{ratio} vs {exact}");
        let c = FemFunction::interpolate(Arc::clone(&mesh), |_| 3.0);
        assert!(interior_gradient_ratio(&c, 0.5, 1.0, 4.0).unwrap() < 1e-12);
        let z = FemFunction::zeros(Arc::clone(&mesh));
        assert!(matches!(
            interior_gradient_ratio(&z, 0.5, 1.0, 4.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn divergence_lift_satisfies_weak_identity() {
        let mesh = unit(32);
        let one = constant_scalar(1.0);
        let g = divergence_lift(Arc::clone(&one), &mesh).unwrap();
        assert!(divergence_residual(&g, &one, &mesh) <= 1e-8);
        let zero = constant_scalar(0.0);
        let g0 = divergence_lift(zero, &mesh).unwrap();
        assert!(g0.values.iter().all(|v| v.norm() <= 1e-10));
    }
}
