use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{stiffness, RhsData, WeakOperator};
use crate::linalg::SparseMatrix;
use crate::mesh::FemFunction;
use crate::{Error, Result};

/// Result of [`contraction_iterate`].
#[derive(Debug, Clone)]
pub struct ContractionOutcome {
    pub solution: FemFunction,
    /// `‖∇u₀‖` followed by the seminorms `‖∇(uₖ − uₖ₋₁)‖` of every update.
    pub history: Vec<f64>,
    pub iterations: usize,
}

impl ContractionOutcome {
    /// Largest ratio of consecutive update norms: a lower bound for the
    /// norm of `L₀⁻¹M` seen by this right-hand side.
    pub fn empirical_factor(&self) -> f64 {
        self.history
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

fn seminorm(s: &SparseMatrix, u: &[f64]) -> f64 {
    let su = s.matvec(u);
    su.iter().zip(u).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
}

/// Fixed-point iteration `uₖ = L₀⁻¹(b − M uₖ₋₁)` starting from `u₀ = L₀⁻¹ b`,
/// stopping when `‖∇(uₖ − uₖ₋₁)‖ ≤ tol · ‖∇u₀‖`.
pub fn contraction_iterate(
    op_l0: &WeakOperator,
    op_m: &WeakOperator,
    rhs: &RhsData,
    tol: f64,
    max_iter: usize,
) -> Result<ContractionOutcome> {
    if !Arc::ptr_eq(op_l0.mesh(), op_m.mesh()) && op_l0.mesh().vertices() != op_m.mesh().vertices() {
        return Err(Error::invalid("operators live on different meshes"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }
    let mesh = op_l0.mesh();
    let s = stiffness(mesh);
    let system = op_l0.dirichlet_system()?;
    let g = rhs.boundary_vector(mesh)?;
    let load = rhs.load_vector(mesh);
    let lifted = op_l0.apply(&g);
    let base: Vec<f64> = system.interior().iter().map(|&v| load[v] - lifted[v]).collect();

    let mut u = system.scatter(&system.solve(&base)?, &g);
    let mut history = vec![seminorm(&s, &u)];
    for k in 1..=max_iter {
        let mu = op_m.apply(&u);
        let b: Vec<f64> = base.iter().zip(system.interior()).map(|(b, &v)| b - mu[v]).collect();
        let next = system.scatter(&system.solve(&b)?, &g);
        let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let update = seminorm(&s, &diff);
        history.push(update);
        u = next;
        if update <= tol * history[0] {
            return Ok(ContractionOutcome {
                solution: FemFunction::new(Arc::clone(mesh), u)?,
                history,
                iterations: k,
            });
        }
        let n = history.len();
        if n >= 4 && (n - 3..n).all(|i| history[i] > history[i - 1]) {
            return Err(Error::NoContraction {
                ratio: history[n - 1] / history[n - 2],
                history,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        history,
    })
}

const POWER_STEPS: usize = 60;

/// Power-iteration estimate of `‖L₀⁻¹M‖` on functions vanishing on the
/// boundary, measured in the seminorm `‖∇·‖_{L²}`. Each probe starts from a
/// seeded random vector; the largest estimate is returned.
pub fn estimate_contraction_norm(op_l0: &WeakOperator, op_m: &WeakOperator, probes: usize, seed: u64) -> Result<f64> {
    if probes == 0 {
        return Err(Error::invalid("at least one probe is required"));
    }
    let mesh = op_l0.mesh();
    let system = op_l0.dirichlet_system()?;
    let interior = system.interior().to_vec();
    let s = stiffness(mesh).restrict(&interior);
    let s_lu = s.factorize()?;
    let m = op_m.matrix().restrict(&interior);
    let mt = m.transpose();
    let norm = |x: &[f64]| seminorm(&s, x);

    let mut best: f64 = 0.0;
    for probe in 0..probes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(probe as u64));
        let mut x: Vec<f64> = (0..interior.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut estimate = 0.0;
        for _ in 0..POWER_STEPS {
            let nx = norm(&x);
            if nx == 0.0 {
                break;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            // y = T x with T = L₀⁻¹M
            let y = system.solve(&m.matvec(&x))?;
            let next = norm(&y);
            // x ← T* y, where T* = S⁻¹ Mᵀ L₀⁻ᵀ S is the adjoint in the S inner product
            let sy = s.matvec(&y);
            x = s_lu.solve(&mt.matvec(&system.solve_transpose(&sy)));
            let converged = (next - estimate).abs() <= 1e-9 * next;
            estimate = next;
            if converged || next == 0.0 {
                break;
            }
        }
        best = best.max(estimate);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::super::{assemble, solve_dirichlet, OperatorKind};
    use super::*;
    use crate::fields::{builtin, constant_matrix, constant_scalar, CoefficientSet};
    use crate::mesh::build_disk_mesh;
    use crate::{Mat2, Point};
    use std::collections::BTreeMap;

    fn unit(n: usize, r: f64) -> Arc<crate::mesh::Mesh> {
        Arc::new(build_disk_mesh(Point::zeros(), r, n).unwrap())
    }

    #[test]
    fn zero_lower_order_converges_in_one_step() {
        let mesh = unit(16, 1.0);
        let id = CoefficientSet::principal("id", constant_matrix(Mat2::identity()));
        let l0 = assemble(&mesh, &id, OperatorKind::L0).unwrap();
        let m = assemble(&mesh, &id, OperatorKind::M).unwrap();
        let rhs = RhsData::source(constant_scalar(1.0));
        let out = contraction_iterate(&l0, &m, &rhs, 1e-10, 50).unwrap();
        assert_eq!(out.iterations, 1);
        let direct = solve_dirichlet(&l0, &rhs).unwrap();
        assert_eq!(out.solution.values(), direct.values());
        assert_eq!(estimate_contraction_norm(&l0, &m, 2, 7).unwrap(), 0.0);
    }

    #[test]
    fn limit_matches_direct_solve() {
        let mesh = unit(24, 1.0);
        let set = CoefficientSet::principal("d", constant_matrix(Mat2::identity())).with_d(constant_scalar(0.5));
        let l0 = assemble(&mesh, &set, OperatorKind::L0).unwrap();
        let m = assemble(&mesh, &set, OperatorKind::M).unwrap();
        let l = assemble(&mesh, &set, OperatorKind::L).unwrap();
        let rhs = RhsData::source(constant_scalar(1.0));
        let out = contraction_iterate(&l0, &m, &rhs, 1e-12, 200).unwrap();
        let direct = solve_dirichlet(&l, &rhs).unwrap();
        let err = out
            .solution
            .values()
            .iter()
            .zip(direct.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn estimate_bounds_observed_factor() {
        let set = builtin("full_lower_order", &BTreeMap::new()).unwrap();
        let mesh = unit(24, 0.4);
        let l0 = assemble(&mesh, &set, OperatorKind::L0).unwrap();
        let m = assemble(&mesh, &set, OperatorKind::M).unwrap();
        let rhs = RhsData::source(constant_scalar(1.0));
        let out = contraction_iterate(&l0, &m, &rhs, 1e-10, 200).unwrap();
        let est = estimate_contraction_norm(&l0, &m, 3, 11).unwrap();
        let factor = out.empirical_factor();
        assert!(factor <= est + 1e-6, "factor {factor} est {est}");
        assert!(est <= factor + 0.1, "factor {factor} est {est}");
        assert_eq!(est, estimate_contraction_norm(&l0, &m, 3, 11).unwrap());
    }

    #[test]
    fn large_lower_order_terms_do_not_contract() {
        let mesh = unit(16, 1.0);
        let set = CoefficientSet::principal("d", constant_matrix(Mat2::identity())).with_d(constant_scalar(-60.0));
        let l0 = assemble(&mesh, &set, OperatorKind::L0).unwrap();
        let m = assemble(&mesh, &set, OperatorKind::M).unwrap();
        let rhs = RhsData::source(constant_scalar(1.0));
        assert!(matches!(
            contraction_iterate(&l0, &m, &rhs, 1e-10, 100),
            Err(Error::NoContraction { .. })
        ));
    }
}
