//! Pointwise passage from `∇ṽ = J(Â∇v + vB̂)` to
//! `f_z̄ = μ f_z + ν conj(f_z) + α f + β conj(f)` for `f = v + iṽ`.
//!
//! Writing `f_z = p₁ + ip₂`, `f_z̄ = q₁ + iq₂`, the Wirtinger identities give
//! `∇v = (p₁ + q₁, q₂ − p₂)` and `∇ṽ = (p₂ + q₂, p₁ − q₁)`. Substituting into
//! the first-order system yields the real 2×2 system
//!
//! ```text
//! (I + Â) q = Mₚ p − v B̂,   Mₚ = [[1 − a₁₁, a₁₂], [−a₂₁, a₂₂ − 1]],
//! ```
//!
//! so `q = T p + v c` with `T = (I + Â)⁻¹Mₚ`, `c = −(I + Â)⁻¹B̂`. A real-linear
//! map `T` on `ℂ` is `w ↦ μw + ν conj(w)`, and `v = (f + conj f)/2` gives
//! `α = β = c/2`.

use crate::{Complex64, Mat2, Point};

/// The complex-linear and anti-linear parts of a real 2×2 matrix acting on
/// `ℂ ≅ ℝ²`: `T w = μ w + ν conj(w)`.
pub fn real_linear_parts(t: &Mat2) -> (Complex64, Complex64) {
    let mu = Complex64::new(0.5 * (t[(0, 0)] + t[(1, 1)]), 0.5 * (t[(1, 0)] - t[(0, 1)]));
    let nu = Complex64::new(0.5 * (t[(0, 0)] - t[(1, 1)]), 0.5 * (t[(1, 0)] + t[(0, 1)]));
    (mu, nu)
}

fn i_plus(a_hat: &Mat2) -> Mat2 {
    let m = Mat2::identity() + a_hat;
    assert!(m.determinant().abs() > 0.0, "I + Â is singular; Â is not elliptic");
    m
}

/// Complex dilatations `(μ, ν)` of `Â`.
pub fn dilatations(a_hat: &Mat2) -> (Complex64, Complex64) {
    let mp = Mat2::new(1.0 - a_hat[(0, 0)], a_hat[(0, 1)], -a_hat[(1, 0)], a_hat[(1, 1)] - 1.0);
    let t = i_plus(a_hat).try_inverse().expect("checked above") * mp;
    real_linear_parts(&t)
}

/// Lower-order coefficients `(α, β)`; they coincide.
pub fn lower_order_coefficients(a_hat: &Mat2, b_hat: &Point) -> (Complex64, Complex64) {
    let c = -(i_plus(a_hat).try_inverse().expect("checked above") * b_hat);
    let alpha = Complex64::new(c.x, c.y) * 0.5;
    (alpha, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Checks the pointwise equivalence: for arbitrary `∇v`, `v`, the vector
    /// `∇ṽ = J(Â∇v + vB̂)` makes `f_z̄ − μf_z − ν conj(f_z) − αf − β conj(f)`
    /// vanish for every `ṽ`.
    fn pointwise_residual(a: Mat2, b: Point, grad_v: Point, v: f64, vt: f64) -> f64 {
        let grad_vt = crate::rotation_j() * (a * grad_v + b * v);
        let fx = Complex64::new(grad_v.x, grad_vt.x);
        let fy = Complex64::new(grad_v.y, grad_vt.y);
        let i = Complex64::i();
        let fz = (fx - i * fy) * 0.5;
        let fzb = (fx + i * fy) * 0.5;
        let f = Complex64::new(v, vt);
        let (mu, nu) = dilatations(&a);
        let (al, be) = lower_order_coefficients(&a, &b);
        (fzb - mu * fz - nu * fz.conj() - al * f - be * f.conj()).norm()
    }

    #[test]
    fn identity_is_holomorphic() {
        let (mu, nu) = dilatations(&Mat2::identity());
        assert_eq!(mu, Complex64::new(0.0, 0.0));
        assert_eq!(nu, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn isotropic_case() {
        for s in [0.1, 0.5, 2.0, 7.0] {
            let (mu, nu) = dilatations(&(Mat2::identity() * s));
            assert!(mu.norm() < 1e-15);
            assert!((nu.norm() - (1.0 - s).abs() / (1.0 + s)).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_drift_with_identity() {
        let b = Point::new(0.8, -0.3);
        let (al, be) = lower_order_coefficients(&Mat2::identity(), &b);
        assert_eq!(al, be);
        assert!((al.norm() - b.norm() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn equivalence_holds_pointwise() {
        let cases = [
            (Mat2::new(1.0, 1.0, -1.0, 1.0), Point::new(0.3, -0.7)),
            (Mat2::new(2.0, 0.5, 0.1, 0.7), Point::new(-1.0, 2.0)),
            (Mat2::new(4.0, -1.0, 0.0, 0.3), Point::new(0.0, 0.0)),
        ];
        for (a, b) in cases {
            for (gv, v, vt) in [(Point::new(1.0, 0.0), 0.5, -0.2), (Point::new(-0.3, 2.0), -1.0, 3.0)] {
                assert!(pointwise_residual(a, b, gv, v, vt) < 1e-14);
            }
        }
    }
}
