use std::sync::Arc;

use serde::Serialize;

use super::{num, Csv, ExperimentConfig, StageFailure};
use crate::fields::{constant_scalar, CoefficientSet};
use crate::mesh::build_disk_mesh;
use crate::operators::{assemble, contraction_iterate, estimate_contraction_norm, OperatorKind, RhsData};
use crate::{Error, Result};

/// Norms at or below this are indistinguishable from a vanishing `M`.
const ZERO_OPERATOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionRow {
    pub radius: f64,
    pub estimated_norm: f64,
    /// `None` when the iteration did not contract or converge.
    pub empirical_factor: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub experiment: &'static str,
    pub coefficients: String,
    pub resolution: usize,
    pub q: f64,
    pub rows: Vec<ContractionRow>,
    /// Log-log slope of the estimated norm against the radius.
    pub fitted_slope: f64,
    /// `1 − 2/q`.
    pub theoretical_floor: f64,
    /// Set when every norm vanishes and the slope is undefined.
    pub slope_undefined: bool,
    pub failure: Option<StageFailure>,
}

impl ContractionReport {
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["radius", "estimated_norm", "empirical_factor", "status"]);
        for row in &self.rows {
            csv.row(&[
                num(row.radius),
                num(row.estimated_norm),
                row.empirical_factor.map(num).unwrap_or_else(|| "nan".into()),
                row.status.clone(),
            ]);
        }
        csv.row(&[
            "fitted_slope".into(),
            num(self.fitted_slope),
            num(self.theoretical_floor),
            if self.slope_undefined { "undefined" } else { "" }.into(),
        ]);
        csv.finish()
    }
}

/// `‖L₀⁻¹M‖` on `B_R` for every radius of the schedule, at the first
/// configured resolution. Non-contraction is recorded per row.
pub fn run_contraction_scaling(config: &ExperimentConfig, coeffs: &CoefficientSet) -> Result<ContractionReport> {
    let resolution = config.resolutions[0];
    let center = config.disk.disk().center;
    let rhs = RhsData::source(constant_scalar(1.0));
    let mut rows = Vec::new();
    let mut failure = None;
    for &radius in &config.radii {
        let step = (|| -> Result<ContractionRow> {
            let mesh = Arc::new(build_disk_mesh(center, radius, resolution)?);
            let l0 = assemble(&mesh, coeffs, OperatorKind::L0)?;
            let m = assemble(&mesh, coeffs, OperatorKind::M)?;
            let estimated_norm = estimate_contraction_norm(&l0, &m, config.probes, config.seed)?;
            let (empirical_factor, status) = match contraction_iterate(&l0, &m, &rhs, 1e-10, 500) {
                Ok(out) => (Some(out.empirical_factor()), "converged".to_string()),
                Err(Error::NoContraction { .. }) => (None, "no_contraction".to_string()),
                Err(Error::NotConverged { .. }) => (None, "not_converged".to_string()),
                Err(e) => return Err(e),
            };
            Ok(ContractionRow {
                radius,
                estimated_norm,
                empirical_factor,
                status,
            })
        })();
        match step {
            Ok(row) => rows.push(row),
            Err(e) => {
                failure = Some(StageFailure {
                    stage: "contraction".into(),
                    resolution: Some(resolution),
                    message: format!("radius {radius}: {e}"),
                });
                break;
            }
        }
    }
    let slope_undefined = rows.iter().all(|r| r.estimated_norm <= ZERO_OPERATOR);
    let fitted_slope = if slope_undefined {
        f64::NAN
    } else {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.estimated_norm > ZERO_OPERATOR)
            .map(|r| (r.radius, r.estimated_norm))
            .unzip();
        super::fit_slope(&xs, &ys)
    };
    Ok(ContractionReport {
        experiment: "contraction_scaling",
        coefficients: coeffs.name.clone(),
        resolution,
        q: coeffs.q,
        rows,
        fitted_slope,
        theoretical_floor: 1.0 - 2.0 / coeffs.q,
        slope_undefined,
        failure,
    })
}
