//! Named coefficient sets used by the tests and the lab.
//!
//! | name                    | parameters (defaults)                          |
//! |-------------------------|------------------------------------------------|
//! | `identity`              | —                                              |
//! | `anisotropic`           | `a` (3), `theta` (0.3)                         |
//! | `rotation_nonsym`       | `t` (1), `lot` (1)                             |
//! | `mollified_checkerboard`| `contrast` (4), `cells` (2), `scale` (0.25)    |
//! | `constant_d`            | `delta` (1)                                    |
//! | `full_lower_order`      | `scale` (1), `q` (4)                           |
//! | `singular_lower_order`  | `q` (4), `eps` (0.4), `x0`/`y0` (0.31, −0.17), `amp` (0.3) |

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{constant_matrix, constant_scalar, CoefficientSet};
use crate::{rotation_j, Error, Mat2, Point, Result};

pub const BUILTIN_NAMES: [&str; 7] = [
    "identity",
    "anisotropic",
    "rotation_nonsym",
    "mollified_checkerboard",
    "constant_d",
    "full_lower_order",
    "singular_lower_order",
];

struct Params<'a> {
    name: &'a str,
    given: &'a BTreeMap<String, f64>,
    allowed: &'static [&'static str],
}

impl Params<'_> {
    fn check(&self) -> Result<()> {
        for key in self.given.keys() {
            if !self.allowed.contains(&key.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown parameter `{key}` for builtin `{}` (accepted: {})",
                    self.name,
                    self.allowed.join(", ")
                )));
            }
        }
        for (key, v) in self.given {
            if !v.is_finite() {
                return Err(Error::invalid(format!("parameter `{key}` is not finite")));
            }
        }
        Ok(())
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.given.get(key).copied().unwrap_or(default)
    }
}

/// Looks up a named coefficient set.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<CoefficientSet> {
    let allowed: &'static [&'static str] = match name {
        "identity" => &[],
        "anisotropic" => &["a", "theta"],
        "rotation_nonsym" => &["t", "lot"],
        "mollified_checkerboard" => &["contrast", "cells", "scale"],
        "constant_d" => &["delta"],
        "full_lower_order" => &["scale", "q"],
        "singular_lower_order" => &["q", "eps", "x0", "y0", "amp"],
        _ => {
            return Err(Error::invalid(format!(
                "unknown builtin `{name}`; valid names are {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    let p = Params {
        name,
        given: params,
        allowed,
    };
    p.check()?;
    let set = match name {
        "identity" => {
            let mut s = CoefficientSet::principal(name, constant_matrix(Mat2::identity()));
            s.declared_k = Some(1.0);
            s
        }
        "anisotropic" => anisotropic(p.get("a", 3.0), p.get("theta", 0.3))?,
        "rotation_nonsym" => rotation_nonsym(p.get("t", 1.0), p.get("lot", 1.0)),
        "mollified_checkerboard" => checkerboard(p.get("contrast", 4.0), p.get("cells", 2.0), p.get("scale", 0.25))?,
        "constant_d" => CoefficientSet::principal(name, constant_matrix(Mat2::identity()))
            .with_d(constant_scalar(p.get("delta", 1.0))),
        "full_lower_order" => full_lower_order(p.get("scale", 1.0), p.get("q", 4.0))?,
        "singular_lower_order" => singular(
            p.get("q", 4.0),
            p.get("eps", 0.4),
            Point::new(p.get("x0", 0.31), p.get("y0", -0.17)),
            p.get("amp", 0.3),
        )?,
        _ => unreachable!(),
    };
    Ok(set)
}

/// `A = R(θ) diag(a, 1/a) R(θ)ᵀ`.
fn anisotropic(a: f64, theta: f64) -> Result<CoefficientSet> {
    if !(a > 0.0) {
        return Err(Error::invalid(format!("anisotropy `a` must be positive, got {a}")));
    }
    let (s, c) = theta.sin_cos();
    let r = Mat2::new(c, -s, s, c);
    let m = r * Mat2::new(a, 0.0, 0.0, 1.0 / a) * r.transpose();
    let mut set = CoefficientSet::principal("anisotropic", constant_matrix(m));
    set.declared_k = Some(a.max(1.0 / a));
    Ok(set)
}

/// `A = I + tJ` with smooth lower-order terms of size `lot`.
fn rotation_nonsym(t: f64, lot: f64) -> CoefficientSet {
    let a = Mat2::identity() + rotation_j() * t;
    let mut set = CoefficientSet::principal("rotation_nonsym", constant_matrix(a))
        .with_b(Arc::new(move |x: Point| {
            Point::new(0.4 + 0.2 * (2.0 * x.y).sin(), -0.3 + 0.2 * (2.0 * x.x).cos()) * lot
        }))
        .with_c(Arc::new(move |x: Point| {
            Point::new(-0.2 + 0.3 * x.y, 0.25 - 0.3 * x.x) * lot
        }))
        .with_d(Arc::new(move |x: Point| lot * 0.5 * (1.0 + 0.5 * (x.x + x.y).sin())));
    set.declared_k = Some(1.0 + t * t);
    set
}

/// `A = contrast^{σ(x)/2} I` where `σ = tanh(sin(π n x₁) sin(π n x₂) / scale)`
/// is a smoothed ±1 checkerboard with `n` cells per unit length.
fn checkerboard(contrast: f64, cells: f64, scale: f64) -> Result<CoefficientSet> {
    if !(contrast >= 1.0) || !(cells > 0.0) || !(scale > 0.0) {
        return Err(Error::invalid("checkerboard needs contrast ≥ 1, cells > 0, scale > 0"));
    }
    let w = std::f64::consts::PI * cells;
    let mut set = CoefficientSet::principal(
        "mollified_checkerboard",
        Arc::new(move |x: Point| {
            let sigma = ((w * x.x).sin() * (w * x.y).sin() / scale).tanh();
            Mat2::identity() * contrast.powf(0.5 * sigma)
        }),
    );
    set.declared_k = Some(contrast.sqrt());
    Ok(set)
}

/// Smooth non-symmetric `A` with all three lower-order terms present.
fn full_lower_order(scale: f64, q: f64) -> Result<CoefficientSet> {
    if !(q > 2.0) {
        return Err(Error::invalid(format!("q must exceed 2, got {q}")));
    }
    let a = Arc::new(|x: Point| {
        Mat2::new(
            1.5 + 0.3 * (2.0 * x.x).sin(),
            0.5 + 0.2 * x.y.cos(),
            -0.2 + 0.2 * (x.x + x.y).sin(),
            1.2 + 0.3 * (2.0 * x.y).cos(),
        )
    });
    Ok(CoefficientSet::principal("full_lower_order", a)
        .with_b(Arc::new(move |x: Point| {
            Point::new(0.8 * x.y.cos(), -0.6 + 0.3 * x.x) * scale
        }))
        .with_c(Arc::new(move |x: Point| {
            Point::new(0.3 + 0.5 * x.x.sin(), 0.7 * (x.x * x.y).cos()) * scale
        }))
        .with_d(Arc::new(move |x: Point| scale * (1.0 + 0.5 * x.x * x.x)))
        .with_q(q))
}

/// Lower-order terms with the profile `amp·|x − x₀|^{−eps}`; `eps·q < 2`
/// keeps `B, C ∈ L^q` and `d ∈ L^{q/2}` while all three are unbounded.
fn singular(q: f64, eps: f64, x0: Point, amp: f64) -> Result<CoefficientSet> {
    if !(q > 2.0) {
        return Err(Error::invalid(format!("q must exceed 2, got {q}")));
    }
    if !(eps > 0.0) || eps * q >= 2.0 {
        return Err(Error::invalid(format!(
            "eps must satisfy 0 < eps < 2/q = {}, got {eps}",
            2.0 / q
        )));
    }
    let profile = move |x: Point| amp * (x - x0).norm().max(1e-12).powf(-eps);
    Ok(
        CoefficientSet::principal("singular_lower_order", constant_matrix(Mat2::identity()))
            .with_b(Arc::new(move |x| Point::new(1.0, 0.5) * profile(x)))
            .with_c(Arc::new(move |x| Point::new(-0.5, 0.8) * profile(x)))
            .with_d(Arc::new(move |x| 0.5 * profile(x)))
            .with_q(q),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{check_ellipticity, lower_order_norms, quadrature_points};
    use crate::mesh::build_disk_mesh;

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn every_builtin_is_elliptic_and_within_declared_k() {
        let mesh = build_disk_mesh(Point::zeros(), 1.0, 16).unwrap();
        for name in BUILTIN_NAMES {
            let set = builtin(name, &none()).unwrap();
            let k = set.estimate_k(&mesh).unwrap();
            assert!(k >= 1.0, "{name}");
            set.estimate_kappa(&mesh).unwrap();
        }
    }

    #[test]
    fn unknown_names_and_parameters_are_rejected() {
        let err = builtin("nope", &none()).unwrap_err().to_string();
        assert!(err.contains("identity") && err.contains("singular_lower_order"));
        let mut p = none();
        p.insert("zeta".into(), 1.0);
        assert!(builtin("anisotropic", &p).is_err());
        let mut p = none();
        p.insert("eps".into(), 0.6);
        assert!(builtin("singular_lower_order", &p).is_err());
    }

    #[test]
    fn rotation_nonsym_k_is_one_plus_t_squared() {
        let mesh = build_disk_mesh(Point::zeros(), 1.0, 8).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let mut p = none();
            p.insert("t".into(), t);
            let set = builtin("rotation_nonsym", &p).unwrap();
            let a = (set.a)(Point::zeros());
            assert!((a - a.transpose()).norm() > 0.0);
            let k = check_ellipticity(&*set.a, &quadrature_points(&mesh)).unwrap();
            assert!((k - (1.0 + t * t)).abs() < 1e-12, "t={t} k={k}");
        }
    }

    #[test]
    fn singular_profile_is_unbounded_but_integrable() {
        let set = builtin("singular_lower_order", &none()).unwrap();
        let x0 = Point::new(0.31, -0.17);
        let near = (set.b)(x0 + Point::new(1e-10, 0.0)).norm();
        assert!(near >= 1e3, "{near}");
        let mesh = build_disk_mesh(Point::zeros(), 1.0, 32).unwrap();
        let kappa = lower_order_norms(&set, &mesh, &mesh.disk()).unwrap();
        assert!(kappa.is_finite() && kappa > 0.0);
    }

    #[test]
    fn anisotropic_k_matches_parameter() {
        let mesh = build_disk_mesh(Point::zeros(), 1.0, 8).unwrap();
        let mut p = none();
        p.insert("a".into(), 5.0);
        let set = builtin("anisotropic", &p).unwrap();
        assert!((set.estimate_k(&mesh).unwrap() - 5.0).abs() < 1e-12);
    }
}
