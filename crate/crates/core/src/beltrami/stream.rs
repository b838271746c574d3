use std::sync::Arc;

use crate::fields::{MatrixField, VectorField};
use crate::mesh::{FemFunction, MID_EDGE};
use crate::operators::stiffness;
use crate::{rotation_j, Error, Point, Result};

/// Largest admissible relative least-squares defect.
pub const MAX_STREAM_DEFECT: f64 = 0.1;

/// A stream function `ṽ` with `∇ṽ ≈ J(Â∇v + vB̂)` and `ṽ(x₀) = 0`.
#[derive(Debug, Clone)]
pub struct StreamFunction {
    pub values: FemFunction,
    /// `‖∇ṽ − t‖_{L²} / ‖t‖_{L²}` for the target field `t` (0 when `t = 0`).
    pub defect: f64,
}

/// Least-squares stream function of the flux `Â∇v + vB̂`.
///
/// Minimizes `‖∇ṽ − J(Â∇v + vB̂)‖_{L²}` over P1 functions (a Neumann problem
/// for the stiffness matrix), then shifts so that `ṽ(x₀) = 0`.
pub fn stream_function(
    v: &FemFunction,
    a_hat: &MatrixField,
    b_hat: &VectorField,
    x0: &Point,
) -> Result<StreamFunction> {
    let mesh = v.mesh();
    let j = rotation_j();
    let n = mesh.vertex_count();
    // target samples at the mid-edge nodes, element by element
    let mut targets = Vec::with_capacity(3 * mesh.triangle_count());
    let mut load = vec![0.0; n];
    let mut target_sq = 0.0;
    for (tri, verts) in mesh.triangles().iter().enumerate() {
        let grad_v = v.gradient_in(tri);
        let grads = mesh.basis_gradients(tri);
        let area = mesh.area(tri);
        for q in &MID_EDGE {
            let x = mesh.point_at(tri, q.bary);
            let t = j * (a_hat(x) * grad_v + b_hat(x) * v.eval_in(tri, q.bary));
            let w = q.weight * area;
            for (k, &vert) in verts.iter().enumerate() {
                load[vert] += w * t.dot(&grads[k]);
            }
            target_sq += w * t.norm_squared();
            targets.push(t);
        }
    }

    // a target at roundoff level of |v| is treated as zero
    let floor = 1e-12 * v.max_modulus() * mesh.radius();
    if target_sq.sqrt() <= floor {
        target_sq = 0.0;
    }
    let pin = mesh.nearest_vertex(x0);
    let mut values = vec![0.0; n];
    if target_sq > 0.0 {
        let free: Vec<usize> = (0..n).filter(|&i| i != pin).collect();
        let lu = stiffness(mesh).restrict(&free).factorize()?;
        let rhs: Vec<f64> = free.iter().map(|&i| load[i]).collect();
        for (&i, x) in free.iter().zip(lu.solve(&rhs)) {
            values[i] = x;
        }
    }
    let mut stream = FemFunction::new(Arc::clone(mesh), values)?;
    let shift = stream.eval_clamped(x0);
    stream = stream.map(|s| s - shift);

    let mut defect_sq = 0.0;
    for tri in 0..mesh.triangle_count() {
        let g = stream.gradient_in(tri);
        let area = mesh.area(tri);
        for (k, q) in MID_EDGE.iter().enumerate() {
            defect_sq += q.weight * area * (g - targets[3 * tri + k]).norm_squared();
        }
    }
    let defect = if target_sq > 0.0 {
        (defect_sq / target_sq).sqrt()
    } else {
        0.0
    };
    if defect > MAX_STREAM_DEFECT {
        return Err(Error::NotCurlFree { defect });
    }
    Ok(StreamFunction { values: stream, defect })
}
