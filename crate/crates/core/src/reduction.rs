//! The multipliers `m`, `w` and the transformed coefficient sets.
//!
//! `m` solves the drift-free equation `−div(A∇m) + C·∇m + dm = 0` with
//! `m = 1` on the boundary. With `Ã = mAᵀ`, `B̃ = mC − A∇m`, `C̃ = mB`, the
//! second multiplier solves `L̃w = 0`, `w = 1` on the boundary. Then
//!
//! ```text
//! Â = mwA,   B̂ = wA∇m + mwB − mAᵀ∇w − mwC,   −div(Â∇v + vB̂) = w L(mv).
//! ```
//!
//! Both multipliers are built on disks small enough that `|m − 1| ≤ 1/2`,
//! found by repeated halving.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::MultiplierKind;
use crate::fields::{check_ellipticity, quadrature_points, CoefficientSet, MatrixField, VectorField};
use crate::mesh::{build_disk_mesh, Disk, FemFunction, Mesh, RecoveredGradient, GAUSS_INTERIOR};
use crate::operators::{assemble, solve_dirichlet, OperatorKind, RhsData};
use crate::{sym_min_eigenvalue, Error, Mat2, Point, Result};

/// Slack used when checking `1/2 ≤ m ≤ 2` outside of [`reduce`].
const MULTIPLIER_SLACK: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionParameters {
    /// Integrability exponent for `∇m`; `None` picks `min(4, (2 + q)/2)`.
    pub p: Option<f64>,
    /// Integrability exponent for `∇w`; `None` picks `min(3, (2 + p)/2)`.
    pub t: Option<f64>,
    /// Starting radius; `None` uses the radius of the supplied disk.
    pub r_target: Option<f64>,
    pub max_halvings: usize,
    pub bound_tolerance: f64,
    /// Mesh resolution for every multiplier solve.
    pub resolution: usize,
}

impl Default for ReductionParameters {
    fn default() -> Self {
        ReductionParameters {
            p: None,
            t: None,
            r_target: None,
            max_halvings: 8,
            bound_tolerance: 0.02,
            resolution: 64,
        }
    }
}

impl ReductionParameters {
    /// The exponents `(p, t)` for integrability `q`, validated `2 < t < p < q`.
    pub fn exponents(&self, q: f64) -> Result<(f64, f64)> {
        let p = self.p.unwrap_or(if q > 4.0 { 4.0 } else { 0.5 * (2.0 + q) });
        let t = self.t.unwrap_or(if p > 3.0 { 3.0 } else { 0.5 * (2.0 + p) });
        if !(2.0 < t && t < p && p < q) {
            return Err(Error::invalid(format!(
                "exponents must satisfy 2 < t < p < q, got t = {t}, p = {p}, q = {q}"
            )));
        }
        Ok((p, t))
    }

    fn start_radius(&self, disk: &Disk) -> Result<f64> {
        let r = self.r_target.unwrap_or(disk.radius);
        if !(r > 0.0 && r <= disk.radius) {
            return Err(Error::invalid(format!(
                "r_target must lie in (0, {}], got {r}",
                disk.radius
            )));
        }
        if !(self.bound_tolerance >= 0.0) {
            return Err(Error::invalid("bound_tolerance must be nonnegative"));
        }
        Ok(r)
    }
}

/// A positive solution with its recovered gradient and certificate data.
#[derive(Debug, Clone)]
pub struct Multiplier {
    pub values: FemFunction,
    pub gradient: RecoveredGradient,
    pub radius: f64,
    pub halvings: usize,
    /// `sup |m − 1|` over the vertices.
    pub sup_z: f64,
    /// `‖∇m‖_{L^exponent}` over the disk (reported, not enforced).
    pub gradient_norm: f64,
    pub exponent: f64,
}

impl Multiplier {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.values.mesh()
    }

    pub fn eval(&self, x: &Point) -> f64 {
        self.values.eval_clamped(x)
    }

    pub fn grad(&self, x: &Point) -> Point {
        self.gradient.eval_clamped(x)
    }
}

/// Solves `L z = −div(−B) − d`, `z = 0` on `∂B_R`, and accepts `m = z + 1`
/// once `sup|z| ≤ 1/2 + bound_tolerance`, halving `R` otherwise. Solver
/// failures on too-large disks also trigger a halving.
pub fn build_multiplier(
    coeffs: &CoefficientSet,
    disk: &Disk,
    params: &ReductionParameters,
    which: MultiplierKind,
    exponent: f64,
) -> Result<Multiplier> {
    let start = params.start_radius(disk)?;
    let mut best = f64::INFINITY;
    for halvings in 0..=params.max_halvings {
        let radius = start / 2f64.powi(halvings as i32);
        let mesh = Arc::new(build_disk_mesh(disk.center, radius, params.resolution)?);
        let op = assemble(&mesh, coeffs, OperatorKind::L)?;
        let (b, d) = (Arc::clone(&coeffs.b), Arc::clone(&coeffs.d));
        let rhs = RhsData {
            flux: Arc::new(move |x| -b(x)),
            source: Arc::new(move |x| -d(x)),
            boundary_values: None,
        };
        let z = match solve_dirichlet(&op, &rhs) {
            Ok(z) => z,
            Err(Error::SolverFailure { .. }) => continue,
            Err(e) => return Err(e),
        };
        let sup_z = z.max_modulus();
        best = best.min(sup_z);
        if sup_z <= 0.5 + params.bound_tolerance {
            let values = z.map(|v| v + 1.0);
            let gradient = values.recovered_gradient();
            let gradient_norm = values.gradient_lp_norm(exponent);
            return Ok(Multiplier {
                values,
                gradient,
                radius,
                halvings,
                sup_z,
                gradient_norm,
                exponent,
            });
        }
    }
    Err(Error::RadiusExhausted {
        which,
        halvings: params.max_halvings,
        best_sup_z: best,
    })
}

fn check_multiplier(m: &FemFunction) -> Result<()> {
    let (min, max) = (m.min_value(), m.max_value());
    if !(min >= 0.5 - MULTIPLIER_SLACK && max <= 2.0 + MULTIPLIER_SLACK) {
        return Err(Error::InvalidMultiplier { min, max });
    }
    Ok(())
}

/// `Ã = mAᵀ`, `B̃ = mC − A∇m`, `C̃ = mB`, `d̃ = 0`, with `∇m` the recovered
/// (vertex-averaged) gradient.
pub fn tilde_coefficients(coeffs: &CoefficientSet, m: &FemFunction) -> Result<CoefficientSet> {
    check_multiplier(m)?;
    let grad = Arc::new(m.recovered_gradient());
    let m = Arc::new(m.clone());
    let (a, b, c) = (Arc::clone(&coeffs.a), Arc::clone(&coeffs.b), Arc::clone(&coeffs.c));
    let (m1, m2, m3) = (Arc::clone(&m), Arc::clone(&m), m);
    let a2 = Arc::clone(&a);
    let mut set = CoefficientSet::principal(
        format!("{}_tilde", coeffs.name),
        Arc::new(move |x| a(x).transpose() * m1.eval_clamped(&x)),
    )
    .with_b(Arc::new(move |x| {
        c(x) * m2.eval_clamped(&x) - a2(x) * grad.eval_clamped(&x)
    }))
    .with_c(Arc::new(move |x| b(x) * m3.eval_clamped(&x)))
    .with_q(coeffs.q);
    set.declared_k = None;
    Ok(set)
}

/// `Â = mwA` and `B̂ = wA∇m + mwB − mAᵀ∇w − mwC`; the ellipticity of `Â`
/// is checked against `1/(4K)` on the quadrature points of `w`'s mesh.
pub fn hat_coefficients(
    coeffs: &CoefficientSet,
    m: &FemFunction,
    w: &FemFunction,
) -> Result<(MatrixField, VectorField)> {
    check_multiplier(m)?;
    check_multiplier(w)?;
    let gm = m.recovered_gradient();
    let gw = w.recovered_gradient();
    let (a_hat, b_hat) = hat_fields(
        coeffs,
        Arc::new(m.clone()),
        Arc::new(gm),
        Arc::new(w.clone()),
        Arc::new(gw),
    );
    let samples = quadrature_points(w.mesh());
    let k = check_ellipticity(&*coeffs.a, &samples)?;
    check_bound(&*a_hat, &samples, 1.0 / (4.0 * k))?;
    Ok((a_hat, b_hat))
}

fn hat_fields(
    coeffs: &CoefficientSet,
    m: Arc<FemFunction>,
    gm: Arc<RecoveredGradient>,
    w: Arc<FemFunction>,
    gw: Arc<RecoveredGradient>,
) -> (MatrixField, VectorField) {
    let a = Arc::clone(&coeffs.a);
    let (m1, w1) = (Arc::clone(&m), Arc::clone(&w));
    let a_hat: MatrixField = Arc::new(move |x| a(x) * (m1.eval_clamped(&x) * w1.eval_clamped(&x)));
    let (a, b, c) = (Arc::clone(&coeffs.a), Arc::clone(&coeffs.b), Arc::clone(&coeffs.c));
    let b_hat: VectorField = Arc::new(move |x| {
        let (mv, wv) = (m.eval_clamped(&x), w.eval_clamped(&x));
        let ax = a(x);
        ax * gm.eval_clamped(&x) * wv + (b(x) - c(x)) * (mv * wv) - ax.transpose() * gw.eval_clamped(&x) * mv
    });
    (a_hat, b_hat)
}

/// Checks `Xξ·ξ ≥ bound|ξ|²` and `X⁻¹ξ·ξ ≥ bound|ξ|²` at every sample.
fn check_bound(a: &(dyn Fn(Point) -> Mat2 + Send + Sync), samples: &[Point], bound: f64) -> Result<()> {
    for &x in samples {
        let ax = a(x);
        let inv = ax.try_inverse().unwrap_or_else(Mat2::zeros);
        let eig = sym_min_eigenvalue(&ax).min(sym_min_eigenvalue(&inv));
        if !(eig >= bound - 1e-6) {
            return Err(Error::EllipticityViolation {
                point: x,
                eigenvalue: eig,
                bound,
            });
        }
    }
    Ok(())
}

/// Certificate data of a reduction, serialized into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionDiagnostics {
    pub r_target: f64,
    pub r1: f64,
    pub r2: f64,
    pub halvings_m: usize,
    pub halvings_w: usize,
    pub p: f64,
    pub t: f64,
    pub m_min: f64,
    pub m_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub sup_z_m: f64,
    pub sup_z_w: f64,
    pub grad_m_lp: f64,
    pub grad_w_lt: f64,
    pub k_estimate: f64,
    pub k_tilde: f64,
    pub k_hat: f64,
    pub b_tilde_lp: f64,
    pub c_tilde_lp: f64,
    pub b_hat_lt: f64,
    pub bounds_ok: bool,
    pub ellipticity_ok: bool,
}

/// The output of [`reduce`].
#[derive(Clone)]
pub struct ReductionResult {
    pub m: Multiplier,
    pub w: Multiplier,
    pub tilde: CoefficientSet,
    pub a_hat: MatrixField,
    pub b_hat: VectorField,
    pub diagnostics: ReductionDiagnostics,
}

impl std::fmt::Debug for ReductionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReductionResult")
            .field("diagnostics", &self.diagnostics)
            .finish_non_exhaustive()
    }
}

impl ReductionResult {
    pub fn r1(&self) -> f64 {
        self.m.radius
    }

    pub fn r2(&self) -> f64 {
        self.w.radius
    }

    /// The mesh of `B_{R₂}` on which `w`, `Â` and `B̂` live.
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.w.mesh()
    }

    /// `(Â, B̂)` as a coefficient set with `C = 0`, `d = 0`.
    pub fn hat_set(&self) -> CoefficientSet {
        let mut set = CoefficientSet::principal("hat", Arc::clone(&self.a_hat)).with_b(Arc::clone(&self.b_hat));
        set.q = self.diagnostics.t;
        set
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.diagnostics)?)
    }
}

fn lp_norm_on(mesh: &Mesh, disk: &Disk, p: f64, g: impl Fn(Point) -> f64) -> Result<f64> {
    Ok(mesh.integrate(|x| g(x).abs().powf(p), disk)?.powf(1.0 / p))
}

/// `m` on `B_{R₁}` for the drift-free operator, the tilde set, `w` on
/// `B_{R₂} ⊆ B_{R₁}` for `L̃`, and the hat coefficients.
pub fn reduce(coeffs: &CoefficientSet, disk: &Disk, params: &ReductionParameters) -> Result<ReductionResult> {
    let (p, t) = params.exponents(coeffs.q)?;
    let r_target = params.start_radius(disk)?;
    let target = Disk::new(disk.center, r_target);

    let m = build_multiplier(&coeffs.without_b(), &target, params, MultiplierKind::M, p)?;
    let tilde = tilde_coefficients(coeffs, &m.values)?;
    let w_params = ReductionParameters {
        r_target: Some(m.radius),
        ..params.clone()
    };
    let w = build_multiplier(
        &tilde,
        &Disk::new(disk.center, m.radius),
        &w_params,
        MultiplierKind::W,
        t,
    )?;
    let (a_hat, b_hat) = hat_fields(
        coeffs,
        Arc::new(m.values.clone()),
        Arc::new(m.gradient.clone()),
        Arc::new(w.values.clone()),
        Arc::new(w.gradient.clone()),
    );

    let m_mesh = m.mesh();
    let w_mesh = w.mesh();
    let samples_m = quadrature_points(m_mesh);
    let samples_w = quadrature_points(w_mesh);
    let k_m = check_ellipticity(&*coeffs.a, &samples_m)?;
    let k_w = check_ellipticity(&*coeffs.a, &samples_w)?;
    let k_tilde = check_ellipticity(&*tilde.a, &samples_m)?;
    let k_hat = check_ellipticity(&*a_hat, &samples_w)?;
    let ellipticity_ok = check_bound(&*tilde.a, &samples_m, 1.0 / (2.0 * k_m)).is_ok()
        && check_bound(&*a_hat, &samples_w, 1.0 / (4.0 * k_w)).is_ok();

    let lo = 0.5 - params.bound_tolerance;
    let hi = 2.0 + params.bound_tolerance;
    let (m_min, m_max) = (m.values.min_value(), m.values.max_value());
    let (w_min, w_max) = (w.values.min_value(), w.values.max_value());
    let bounds_ok = m_min >= lo && m_max <= hi && w_min >= lo && w_max <= hi;

    let disk_m = m_mesh.disk();
    let disk_w = w_mesh.disk();
    let diagnostics = ReductionDiagnostics {
        r_target,
        r1: m.radius,
        r2: w.radius,
        halvings_m: m.halvings,
        halvings_w: w.halvings,
        p,
        t,
        m_min,
        m_max,
        w_min,
        w_max,
        sup_z_m: m.sup_z,
        sup_z_w: w.sup_z,
        grad_m_lp: m.gradient_norm,
        grad_w_lt: w.gradient_norm,
        k_estimate: k_m,
        k_tilde,
        k_hat,
        b_tilde_lp: lp_norm_on(m_mesh, &disk_m, p, |x| (tilde.b)(x).norm())?,
        c_tilde_lp: lp_norm_on(m_mesh, &disk_m, p, |x| (tilde.c)(x).norm())?,
        b_hat_lt: lp_norm_on(w_mesh, &disk_w, t, |x| b_hat(x).norm())?,
        bounds_ok,
        ellipticity_ok,
    };
    Ok(ReductionResult {
        m,
        w,
        tilde,
        a_hat,
        b_hat,
        diagnostics,
    })
}

/// A smooth function with its gradient.
struct TestFunction {
    center: Point,
    radius: f64,
    /// `c[i][j]` multiplies `ξ₁ⁱ ξ₂ʲ`.
    c: [[f64; 3]; 3],
}

impl TestFunction {
    fn random(rng: &mut ChaCha8Rng, center: Point, radius: f64) -> Self {
        let mut c = [[0.0; 3]; 3];
        for row in &mut c {
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        TestFunction { center, radius, c }
    }

    /// `(P(ξ)(1 − |ξ|²), ∇_x)` with `ξ = (x − center)/radius`.
    fn eval(&self, x: &Point) -> (f64, Point) {
        let xi = (x - self.center) / self.radius;
        let pw = |t: f64| [1.0, t, t * t];
        let dpw = |t: f64| [0.0, 1.0, 2.0 * t];
        let (px, py, dx, dy) = (pw(xi.x), pw(xi.y), dpw(xi.x), dpw(xi.y));
        let (mut p, mut p1, mut p2) = (0.0, 0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                p += self.c[i][j] * px[i] * py[j];
                p1 += self.c[i][j] * dx[i] * py[j];
                p2 += self.c[i][j] * px[i] * dy[j];
            }
        }
        let cut = 1.0 - xi.norm_squared();
        let value = p * cut;
        let grad_xi = Point::new(p1 * cut - 2.0 * xi.x * p, p2 * cut - 2.0 * xi.y * p);
        (value, grad_xi / self.radius)
    }
}

/// Largest relative mismatch between `∫ Â∇v·∇ψ + vB̂·∇ψ` and the full
/// `L`-pairing of `(mv, wψ)` over seeded random test pairs supported in
/// `B_{R₂}`.
pub fn verify_factorization(
    coeffs: &CoefficientSet,
    result: &ReductionResult,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let mesh = result.mesh();
    let (center, radius) = (mesh.center(), mesh.radius());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    // Sample every field once per quadrature node.
    struct Node {
        weight: f64,
        x: Point,
        a: Mat2,
        b: Point,
        c: Point,
        d: f64,
        m: f64,
        gm: Point,
        w: f64,
        gw: Point,
        a_hat: Mat2,
        b_hat: Point,
    }
    let mut nodes = Vec::with_capacity(3 * mesh.triangle_count());
    for tri in 0..mesh.triangle_count() {
        for q in &GAUSS_INTERIOR {
            let x = mesh.point_at(tri, q.bary);
            nodes.push(Node {
                weight: q.weight * mesh.area(tri),
                x,
                a: (coeffs.a)(x),
                b: (coeffs.b)(x),
                c: (coeffs.c)(x),
                d: (coeffs.d)(x),
                m: result.m.eval(&x),
                gm: result.m.grad(&x),
                w: result.w.values.eval_in(tri, q.bary),
                gw: result.w.grad(&x),
                a_hat: (result.a_hat)(x),
                b_hat: (result.b_hat)(x),
            });
        }
    }
    for _ in 0..trials {
        let v = TestFunction::random(&mut rng, center, radius);
        let psi = TestFunction::random(&mut rng, center, radius);
        let (mut left, mut right) = (0.0, 0.0);
        for n in &nodes {
            let (vv, gv) = v.eval(&n.x);
            let (pv, gp) = psi.eval(&n.x);
            left += n.weight * ((n.a_hat * gv).dot(&gp) + vv * n.b_hat.dot(&gp));
            let u = n.m * vv;
            let gu = n.gm * vv + gv * n.m;
            let phi = n.w * pv;
            let gphi = n.gw * pv + gp * n.w;
            right += n.weight * ((n.a * gu).dot(&gphi) + u * n.b.dot(&gphi) + phi * n.c.dot(&gu) + n.d * u * phi);
        }
        let rel = (left - right).abs() / (left.abs() + right.abs() + f64::EPSILON);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin, constant_matrix};
    use std::collections::BTreeMap;

    fn params(res: usize) -> ReductionParameters {
        ReductionParameters {
            resolution: res,
            ..Default::default()
        }
    }

    #[test]
    fn exponent_defaults_respect_ordering() {
        let p = ReductionParameters::default();
        assert_eq!(p.exponents(8.0).unwrap(), (4.0, 3.0));
        assert_eq!(p.exponents(4.0).unwrap(), (3.0, 2.5));
        let bad = ReductionParameters {
            p: Some(5.0),
            ..Default::default()
        };
        assert!(bad.exponents(4.0).is_err());
    }

    #[test]
    fn identity_reduction_is_trivial() {
        let set = builtin("identity", &BTreeMap::new()).unwrap();
        let disk = Disk::new(Point::zeros(), 1.0);
        let r = reduce(&set, &disk, &params(16)).unwrap();
        assert_eq!(r.r1(), 1.0);
        assert_eq!(r.r2(), 1.0);
        // gradients of constants are zero up to roundoff
        assert!(r.m.values.values().iter().all(|&v| v == 1.0));
        assert!(r.w.values.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let x = Point::new(0.3, 0.2);
        assert!(((r.a_hat)(x) - Mat2::identity()).norm() < 1e-14);
        assert!((r.b_hat)(x).norm() < 1e-13);
        assert!(verify_factorization(&set, &r, 5, 1).unwrap() <= 1e-12);
    }

    #[test]
    fn tilde_with_unit_multiplier_swaps_terms() {
        let mesh = Arc::new(build_disk_mesh(Point::zeros(), 1.0, 8).unwrap());
        let one = FemFunction::interpolate(Arc::clone(&mesh), |_| 1.0);
        let set = CoefficientSet::principal("nonsym", constant_matrix(Mat2::new(1.0, 1.0, -1.0, 1.0)))
            .with_b(Arc::new(|x: Point| Point::new(x.x, 2.0)))
            .with_c(Arc::new(|x: Point| Point::new(-1.0, x.y)));
        let t = tilde_coefficients(&set, &one).unwrap();
        let x = Point::new(0.1, -0.4);
        assert_eq!((t.a)(x), Mat2::new(1.0, -1.0, 1.0, 1.0));
        assert!(((t.b)(x) - (set.c)(x)).norm() < 1e-14);
        assert_eq!((t.c)(x), (set.b)(x));
        assert_eq!((t.d)(x), 0.0);
    }

    #[test]
    fn out_of_range_multiplier_is_rejected() {
        let mesh = Arc::new(build_disk_mesh(Point::zeros(), 1.0, 8).unwrap());
        let big = FemFunction::interpolate(Arc::clone(&mesh), |_| 3.0);
        let set = builtin("identity", &BTreeMap::new()).unwrap();
        assert!(matches!(
            tilde_coefficients(&set, &big),
            Err(Error::InvalidMultiplier { .. })
        ));
    }

    #[test]
    fn large_zeroth_order_term_forces_halving() {
        let mut p = BTreeMap::new();
        p.insert("delta".to_string(), 40.0);
        let set = builtin("constant_d", &p).unwrap();
        let m = build_multiplier(
            &set,
            &Disk::new(Point::zeros(), 1.0),
            &params(24),
            MultiplierKind::M,
            3.0,
        )
        .unwrap();
        assert!(m.radius < 1.0);
        assert!(m.sup_z <= 0.52);
    }

    #[test]
    fn exhausted_radius_reports_best_value() {
        let mut p = BTreeMap::new();
        p.insert("delta".to_string(), 1e6);
        let set = builtin("constant_d", &p).unwrap();
        let params = ReductionParameters {
            max_halvings: 1,
            resolution: 8,
            ..Default::default()
        };
        match build_multiplier(&set, &Disk::new(Point::zeros(), 1.0), &params, MultiplierKind::W, 3.0) {
            Err(Error::RadiusExhausted { which, best_sup_z, .. }) => {
                assert_eq!(which, MultiplierKind::W);
                assert!(best_sup_z > 0.5);
            }
            other => panic!("{other:?}"),
        }
    }
}
