use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use uc2d::beltrami::dilatations;
use uc2d::fields::pointwise_k;
use uc2d::lab::{fit_slope, norm_profile, three_spheres_exponent, ExperimentConfig, ExperimentKind};
use uc2d::mesh::{build_disk_mesh, FemFunction};
use uc2d::{Complex64, Mat2, Point};

/// `R(θ) diag(λ₁, λ₂) R(θ)ᵀ + s J`: positive definite symmetric part.
fn elliptic(l1: f64, l2: f64, theta: f64, skew: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    let r = Mat2::new(c, -s, s, c);
    r * Mat2::new(l1, 0.0, 0.0, l2) * r.transpose() + Mat2::new(0.0, -skew, skew, 0.0)
}

fn poly(mesh: Arc<uc2d::mesh::Mesh>, x0: Point, n: i32) -> FemFunction {
    FemFunction::interpolate(mesh, |x| Complex64::new(x.x - x0.x, x.y - x0.y).powi(n).re)
}

proptest! {
    #[test]
    fn dilatations_stay_below_one(
        l1 in 0.05f64..20.0, l2 in 0.05f64..20.0, theta in 0.0f64..PI, skew in -5.0f64..5.0,
    ) {
        let a = elliptic(l1, l2, theta, skew);
        let (mu, nu) = dilatations(&a);
        let k = mu.norm() + nu.norm();
        prop_assert!(k < 1.0, "|μ|+|ν| = {k} for {a}");
        // Larger K cannot give a bound arbitrarily close to 1.
        let big_k = pointwise_k(&a).unwrap();
        prop_assert!(k <= 1.0 - 1.0 / (4.0 * big_k * big_k), "k = {k}, K = {big_k}");
    }

    #[test]
    fn isotropic_matrices_have_real_nu(s in 1e-3f64..1e3) {
        let (mu, nu) = dilatations(&Mat2::new(s, 0.0, 0.0, s));
        prop_assert!(mu.norm() < 1e-12);
        prop_assert!((nu.re - (1.0 - s) / (1.0 + s)).abs() < 1e-12);
        prop_assert!(nu.im.abs() < 1e-12);
    }

    #[test]
    fn meshes_are_positively_oriented_and_cover_the_disk(
        cx in -3.0f64..3.0, cy in -3.0f64..3.0, radius in 0.05f64..5.0, res in 4usize..40,
    ) {
        let center = Point::new(cx, cy);
        let mesh = build_disk_mesh(center, radius, res).unwrap();
        let total: f64 = (0..mesh.triangle_count()).map(|t| mesh.signed_area(t)).sum();
        prop_assert!((0..mesh.triangle_count()).all(|t| mesh.signed_area(t) > 0.0));
        // An inscribed polygon: area below πR², converging as the mesh refines.
        prop_assert!(total <= PI * radius * radius * (1.0 + 1e-12));
        prop_assert!(total >= PI * radius * radius * (1.0 - 2.0 / (res * res) as f64));
        for (v, x) in mesh.vertices().iter().enumerate() {
            let d = (x - center).norm();
            prop_assert!(d <= radius * (1.0 + 1e-12));
            if mesh.is_boundary(v) {
                prop_assert!((d - radius).abs() <= 1e-12 * radius.max(1.0));
            }
        }
        prop_assert!(mesh.mesh_size() > 0.0 && mesh.mesh_size() <= 2.0 * radius);
    }

    #[test]
    fn norm_profiles_grow_with_the_radius(
        n in 0i32..4, ox in -0.25f64..0.25, oy in -0.25f64..0.25,
    ) {
        let mesh = Arc::new(build_disk_mesh(Point::zeros(), 1.0, 24).unwrap());
        let x0 = Point::new(ox, oy);
        let u = poly(mesh, x0, n);
        let radii = [0.6, 0.4, 0.2, 0.1, 0.05];
        let p = norm_profile(&u, &x0, &radii).unwrap();
        for w in p.l2_norms.windows(2).chain(p.linf_norms.windows(2)) {
            // Radii decrease along the profile.
            prop_assert!(w[1] <= w[0] + 1e-10, "{:?}", p.l2_norms);
        }
        prop_assert!(p.l2_norms.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn power_law_slopes_are_recovered(slope in -3.0f64..6.0, c in 0.1f64..10.0) {
        let xs = [0.8, 0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(slope)).collect();
        prop_assert!((fit_slope(&xs, &ys) - slope).abs() < 1e-10);
    }

    #[test]
    fn power_law_three_spheres_exponent_is_scale_free(
        a in 0.5f64..6.0, rho in 0.01f64..0.1, f1 in 1.2f64..4.0, f2 in 1.2f64..4.0,
    ) {
        let (r, big) = (rho * f1, rho * f1 * f2);
        let theta = three_spheres_exponent(rho.powf(a), r.powf(a), big.powf(a)).unwrap();
        let exact = (big / r).ln() / (big / rho).ln();
        prop_assert!((theta - exact).abs() < 1e-10);
    }

    #[test]
    fn config_schedules_must_be_monotone(mut radii in prop::collection::vec(0.01f64..0.9, 4..7)) {
        radii.sort_by(|a, b| b.partial_cmp(a).unwrap());
        radii.dedup();
        prop_assume!(radii.len() >= 4);
        let json = |r: &[f64]| format!(
            r#"{{"coefficients": {{"builtin": "identity"}}, "resolutions": [8], "radii": {r:?}}}"#
        );
        let good = ExperimentConfig::from_json(&json(&radii)).unwrap();
        prop_assert!(good.validate(ExperimentKind::ContractionScaling).is_ok());
        radii.swap(0, 1);
        let bad = ExperimentConfig::from_json(&json(&radii)).unwrap();
        prop_assert!(bad.validate(ExperimentKind::ContractionScaling).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fitted_order_is_scale_covariant(n in 1i32..4, lambda in 0.2f64..5.0) {
        let radii = [0.8, 0.4, 0.2, 0.1, 0.05];
        let order = |scale: f64| {
            let mesh = Arc::new(build_disk_mesh(Point::zeros(), scale, 64).unwrap());
            let u = poly(mesh, Point::zeros(), n);
            let r: Vec<f64> = radii.iter().map(|r| r * scale).collect();
            norm_profile(&u, &Point::zeros(), &r).unwrap().fitted_order
        };
        let (a, b) = (order(1.0), order(lambda));
        prop_assert!((a - b).abs() < 1e-2, "{a} vs {b}");
    }
}
