use std::sync::Arc;

use serde::Serialize;

use super::ExperimentConfig;
use crate::beltrami::{beltrami_from_reduction, beltrami_residual, similarity_factor, BeltramiData, HolderReport};
use crate::fields::CoefficientSet;
use crate::mesh::{build_disk_mesh, Disk, GAUSS_INTERIOR};
use crate::reduction::{reduce, verify_factorization, ReductionDiagnostics, ReductionParameters};
use crate::Result;

/// The stage that failed and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageFailure {
    pub stage: String,
    pub resolution: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilaritySummary {
    pub input_residual: f64,
    pub divided_residual: f64,
    pub iterations: usize,
    pub holder: HolderReport,
}

/// Everything measured at one mesh resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineLevel {
    pub resolution: usize,
    pub reduction: ReductionDiagnostics,
    pub factorization_residual: f64,
    pub k_bound: f64,
    /// `‖α‖_{L^t} + ‖β‖_{L^t}` on `B_{R₂}`.
    pub alpha_beta_lt: f64,
    pub stream_defect: f64,
    /// `‖ṽ‖_{L∞(B_{r/2})}/‖v‖_{L∞(B_r)}` with `r = R₂/2`.
    pub stream_ratio: f64,
    pub beltrami_residual: f64,
    pub similarity: SimilaritySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub experiment: &'static str,
    pub coefficients: String,
    pub k_estimate: Option<f64>,
    pub kappa_estimate: Option<f64>,
    pub levels: Vec<PipelineLevel>,
    /// Residual ratios between consecutive resolutions (coarse / fine).
    pub factorization_ratios: Vec<f64>,
    pub beltrami_ratios: Vec<f64>,
    /// Largest `k_bound` over the levels.
    pub k_bound: f64,
    pub failure: Option<StageFailure>,
}

fn lt_norm(data: &BeltramiData, t: f64) -> f64 {
    let mesh = data.mesh();
    let part = |field: &crate::beltrami::ComplexField| {
        mesh.integrate_elements(&GAUSS_INTERIOR, |_, _, x| field(x).norm().powf(t))
            .powf(1.0 / t)
    };
    part(&data.alpha) + part(&data.beta)
}

fn ratios(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[0] / w[1]).collect()
}

/// Reduction, factorization check, Beltrami passage and similarity factor
/// at every configured resolution.
pub fn run_pipeline(config: &ExperimentConfig, coeffs: &CoefficientSet) -> Result<PipelineReport> {
    let disk = config.disk.disk();
    let mut report = PipelineReport {
        experiment: "pipeline",
        coefficients: coeffs.name.clone(),
        k_estimate: None,
        kappa_estimate: None,
        levels: Vec::new(),
        factorization_ratios: Vec::new(),
        beltrami_ratios: Vec::new(),
        k_bound: 0.0,
        failure: None,
    };
    let fail = |stage: &str, resolution: Option<usize>, e: crate::Error| StageFailure {
        stage: stage.into(),
        resolution,
        message: e.to_string(),
    };

    let mesh = Arc::new(build_disk_mesh(disk.center, disk.radius, config.resolutions[0])?);
    let constants = coeffs
        .estimate_k(&mesh)
        .and_then(|k| Ok((k, coeffs.estimate_kappa(&mesh)?)));
    match constants {
        Ok((k, kappa)) => {
            report.k_estimate = Some(k);
            report.kappa_estimate = Some(kappa);
        }
        Err(e) => {
            report.failure = Some(fail("constants", None, e));
            return Ok(report);
        }
    }

    for &res in &config.resolutions {
        match level(config, coeffs, &disk, res) {
            Ok(l) => report.levels.push(l),
            Err((stage, e)) => {
                report.failure = Some(fail(stage, Some(res), e));
                break;
            }
        }
    }
    let fact: Vec<f64> = report.levels.iter().map(|l| l.factorization_residual).collect();
    let belt: Vec<f64> = report.levels.iter().map(|l| l.beltrami_residual).collect();
    report.factorization_ratios = ratios(&fact);
    report.beltrami_ratios = ratios(&belt);
    report.k_bound = report.levels.iter().map(|l| l.k_bound).fold(0.0, f64::max);
    Ok(report)
}

fn level(
    config: &ExperimentConfig,
    coeffs: &CoefficientSet,
    disk: &Disk,
    resolution: usize,
) -> std::result::Result<PipelineLevel, (&'static str, crate::Error)> {
    let params = ReductionParameters {
        resolution,
        ..config.reduction.clone()
    };
    let reduction = reduce(coeffs, disk, &params).map_err(|e| ("reduction", e))?;
    let factorization_residual =
        verify_factorization(coeffs, &reduction, config.trials, config.seed).map_err(|e| ("factorization", e))?;
    let (data, stream) = beltrami_from_reduction(&reduction).map_err(|e| ("beltrami", e))?;
    let r = 0.5 * reduction.r2();
    let center = reduction.mesh().center();
    let v_norm = data.v().linf_norm_on(&Disk::new(center, r));
    let stream_ratio = data.v_tilde().linf_norm_on(&Disk::new(center, 0.5 * r)) / v_norm;
    let residual = beltrami_residual(&data);
    let sim = similarity_factor(&data, 1e-6 * data.f.max_modulus()).map_err(|e| ("similarity", e))?;
    Ok(PipelineLevel {
        resolution,
        factorization_residual,
        k_bound: data.k_bound,
        alpha_beta_lt: lt_norm(&data, reduction.diagnostics.t),
        stream_defect: stream.defect,
        stream_ratio,
        beltrami_residual: residual,
        similarity: SimilaritySummary {
            input_residual: sim.input_residual,
            divided_residual: sim.divided_residual,
            iterations: sim.iterations,
            holder: sim.holder,
        },
        reduction: reduction.diagnostics,
    })
}
