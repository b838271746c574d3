use std::collections::BTreeMap;

use uc2d::fields::{builtin, Raster, COEFFICIENT_CHANNELS};
use uc2d::lab::{
    run_contraction_scaling, run_doubling, run_experiment, run_pipeline, run_three_spheres, ExperimentConfig,
    ExperimentKind,
};
use uc2d::Point;

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

#[test]
fn pipeline_on_identity_is_exact() {
    let c = config(r#"{"coefficients": {"builtin": "identity"}, "resolutions": [16, 32], "trials": 4}"#);
    let r = run_pipeline(&c, &c.coefficient_set().unwrap()).unwrap();
    assert!(r.failure.is_none(), "{:?}", r.failure);
    assert!(r.k_bound <= 1e-10);
    for l in &r.levels {
        assert!(l.factorization_residual <= 1e-8);
        assert!(l.beltrami_residual <= 1e-8);
        assert!(l.similarity.divided_residual <= 1e-8);
    }
}

#[test]
fn pipeline_on_rotation_nonsym() {
    let c = config(
        r#"{"coefficients": {"builtin": "rotation_nonsym", "params": {"t": 1}}, "resolutions": [16, 32, 64], "trials": 6}"#,
    );
    let r = run_pipeline(&c, &c.coefficient_set().unwrap()).unwrap();
    assert!(r.failure.is_none(), "{:?}", r.failure);
    assert!(r.k_bound > 0.0 && r.k_bound < 1.0);
    assert!(
        r.factorization_ratios.iter().all(|&q| q > 1.0),
        "{:?}",
        r.factorization_ratios
    );
}

#[test]
fn contraction_without_lower_order_terms_is_flagged() {
    let c =
        config(r#"{"coefficients": {"builtin": "anisotropic"}, "resolutions": [16], "radii": [0.4, 0.2, 0.1, 0.05]}"#);
    let r = run_contraction_scaling(&c, &c.coefficient_set().unwrap()).unwrap();
    assert!(r.rows.iter().all(|row| row.estimated_norm <= 1e-12));
    assert!(r.slope_undefined && r.fitted_slope.is_nan());
    assert!(r.to_csv().lines().last().unwrap().ends_with("undefined"));
}

#[test]
fn contraction_norm_is_linear_in_the_lower_order_terms() {
    let json = |scale: f64| {
        format!(
            r#"{{"coefficients": {{"builtin": "full_lower_order"}}, "resolutions": [16],
                "radii": [0.4, 0.2, 0.1, 0.05], "lower_order_scale": {scale}, "seed": 3}}"#
        )
    };
    let base = config(&json(1.0));
    let twice = config(&json(2.0));
    let a = run_contraction_scaling(&base, &base.coefficient_set().unwrap()).unwrap();
    let b = run_contraction_scaling(&twice, &twice.coefficient_set().unwrap()).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        let ratio = y.estimated_norm / x.estimated_norm;
        assert!((ratio - 2.0).abs() <= 0.3, "radius {}: ratio {ratio}", x.radius);
    }
}

#[test]
fn doubling_of_a_constant_is_two() {
    let c = config(
        r#"{"coefficients": {"builtin": "identity"}, "resolutions": [64, 128], "radii": [0.4, 0.2, 0.1],
            "solution": {"kind": "constant", "value": 3.5}}"#,
    );
    let r = run_doubling(&c, &c.coefficient_set().unwrap()).unwrap();
    let err = |res: usize, radius: f64| {
        let row = r
            .rows
            .iter()
            .find(|row| row.resolution == res && row.r == radius)
            .unwrap();
        (row.ratio.unwrap() - 2.0).abs()
    };
    for radius in [0.4, 0.2, 0.1] {
        assert!(err(64, radius) < 0.05, "r = {radius}: {}", err(64, radius));
        assert!(err(128, radius) < 0.02, "r = {radius}: {}", err(128, radius));
    }
}

#[test]
fn doubling_of_a_rough_solution_stays_bounded() {
    let c = config(
        r#"{"coefficients": {"builtin": "mollified_checkerboard"}, "resolutions": [64],
            "radii": [0.4, 0.2, 0.1, 0.05], "solution": {"kind": "discrete", "x0": [0.05, -0.03]}}"#,
    );
    let r = run_doubling(&c, &c.coefficient_set().unwrap()).unwrap();
    assert!(r.rows.iter().all(|row| row.ratio.is_some_and(|q| q > 1.0 && q < 16.0)));
}

#[test]
fn three_spheres_of_a_constant() {
    let c = config(
        r#"{"coefficients": {"builtin": "identity"}, "resolutions": [64], "radii": [0.8],
            "solution": {"kind": "constant", "value": -1.0}}"#,
    );
    let triples = [[0.1, 0.2, 0.8], [0.2, 0.3, 0.6]];
    let r = run_three_spheres(&c, &c.coefficient_set().unwrap(), &triples).unwrap();
    for (row, t) in r.rows.iter().zip(triples) {
        let exact = (t[2] / t[1]).ln() / (t[2] / t[0]).ln();
        assert!((row.theta.unwrap() - exact).abs() / exact < 0.02);
    }
}

#[test]
fn csv_outputs_have_header_rows_and_footer() {
    let c = config(
        r#"{"coefficients": {"builtin": "identity"}, "resolutions": [16], "radii": [0.4, 0.2, 0.1],
            "solution": {"kind": "polynomial", "degree": 1}}"#,
    );
    let out = run_experiment(ExperimentKind::Doubling, &c).unwrap();
    let csv = out.csv.unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    assert!(lines.last().unwrap().contains("max_ratio"));
    assert!(!csv.contains(' '));
    assert!(out.report.ends_with("}\n"));
}

#[test]
fn mismatched_experiment_is_rejected() {
    let c = config(
        r#"{"experiment": "doubling", "coefficients": {"builtin": "identity"}, "resolutions": [16],
            "radii": [0.4, 0.2, 0.1, 0.05]}"#,
    );
    assert!(run_experiment(ExperimentKind::ContractionScaling, &c).is_err());
}

#[test]
fn raster_coefficients_run_deterministically() {
    let set = builtin("rotation_nonsym", &BTreeMap::new()).unwrap();
    let raster = Raster::sample(
        33,
        33,
        [-1.0, 1.0, -1.0, 1.0],
        COEFFICIENT_CHANNELS.iter().map(|s| s.to_string()).collect(),
        |x: Point| {
            let a = (set.a)(x);
            let (b, cc, d) = ((set.b)(x), (set.c)(x), (set.d)(x));
            vec![a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)], b.x, b.y, cc.x, cc.y, d]
        },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("rot.raster"), raster.to_text()).unwrap();
    let cfg_path = dir.path().join("config.json");
    std::fs::write(
        &cfg_path,
        r#"{"coefficients": {"raster": "rot.raster"}, "resolutions": [16, 32], "trials": 3, "seed": 9}"#,
    )
    .unwrap();
    let c = ExperimentConfig::read(&cfg_path).unwrap();
    let a = run_experiment(ExperimentKind::Pipeline, &c).unwrap();
    let b = run_experiment(ExperimentKind::Pipeline, &c).unwrap();
    assert!(a.success, "{}", a.report);
    assert_eq!(a.report, b.report);
    assert!(a.report.contains("\"rot\""));
}
