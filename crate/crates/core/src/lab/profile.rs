use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{num, Csv, ExperimentConfig, StageFailure};
use crate::fields::CoefficientSet;
use crate::mesh::{build_disk_mesh, Disk, FemFunction};
use crate::operators::{assemble, OperatorKind, RhsData};
use crate::{Complex64, Error, Point, Result};

/// Norms at or below this count as zero.
pub const ZERO_NORM: f64 = 1e-14;

/// How the function under study is produced on each mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionRecipe {
    /// `Re((z − x₀)ⁿ)`, interpolated.
    Polynomial {
        degree: u32,
        #[serde(default)]
        x0: Option<[f64; 2]>,
    },
    Constant {
        value: f64,
        #[serde(default)]
        x0: Option<[f64; 2]>,
    },
    Zero {
        #[serde(default)]
        x0: Option<[f64; 2]>,
    },
    /// `u₁ − (u₁(x₀)/u₂(x₀)) u₂` for the discrete solutions of `Lu = 0` with
    /// boundary data `x₁ − x₀₁` and `1`: a discrete solution vanishing at `x₀`.
    Discrete {
        #[serde(default)]
        x0: Option<[f64; 2]>,
    },
}

impl SolutionRecipe {
    /// The base point; the disk center when unset.
    pub fn x0(&self, disk: &Disk) -> Point {
        let x0 = match self {
            SolutionRecipe::Polynomial { x0, .. }
            | SolutionRecipe::Constant { x0, .. }
            | SolutionRecipe::Zero { x0 }
            | SolutionRecipe::Discrete { x0 } => x0,
        };
        x0.map(|p| Point::new(p[0], p[1])).unwrap_or(disk.center)
    }

    /// The function on a mesh of `disk` at `resolution`.
    pub fn build(&self, coeffs: &CoefficientSet, disk: &Disk, resolution: usize) -> Result<FemFunction> {
        let mesh = Arc::new(build_disk_mesh(disk.center, disk.radius, resolution)?);
        let x0 = self.x0(disk);
        match self {
            SolutionRecipe::Polynomial { degree, .. } => {
                let n = *degree as i32;
                Ok(FemFunction::interpolate(mesh, |x| {
                    Complex64::new(x.x - x0.x, x.y - x0.y).powi(n).re
                }))
            }
            SolutionRecipe::Constant { value, .. } => Ok(FemFunction::interpolate(mesh, |_| *value)),
            SolutionRecipe::Zero { .. } => Ok(FemFunction::zeros(mesh)),
            SolutionRecipe::Discrete { .. } => {
                let op = assemble(&mesh, coeffs, OperatorKind::L)?;
                let system = op.dirichlet_system()?;
                let solve =
                    |g: FemFunction| crate::operators::solve_with(&op, &system, &RhsData::default().with_boundary(g));
                let u1 = solve(FemFunction::interpolate(Arc::clone(&mesh), |x| x.x - x0.x))?;
                let u2 = solve(FemFunction::interpolate(Arc::clone(&mesh), |_| 1.0))?;
                let (a, b) = (u1.eval_clamped(&x0), u2.eval_clamped(&x0));
                if !(b.abs() > 1e-8) {
                    return Err(Error::Degenerate(format!(
                        "the solution with unit boundary data vanishes at x0 ({b})"
                    )));
                }
                let ratio = a / b;
                FemFunction::new(
                    mesh,
                    u1.values()
                        .iter()
                        .zip(u2.values())
                        .map(|(p, q)| p - ratio * q)
                        .collect(),
                )
            }
        }
    }
}

/// Least-squares slope of `log y` against `log x` (`NaN` for fewer than two
/// points or a degenerate abscissa).
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 || pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}

/// `‖u‖_{L²(B_r(x₀))}` and `‖u‖_{L∞(B_r(x₀))}` over a radii schedule, with the
/// fitted growth exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormProfile {
    pub radii: Vec<f64>,
    pub l2_norms: Vec<f64>,
    pub linf_norms: Vec<f64>,
    /// `d log‖u‖_{L²} / d log r` between consecutive radii.
    pub local_slopes: Vec<f64>,
    /// Radii used in the fit: at least five mesh cells, excluding the largest.
    pub fit_window: Vec<f64>,
    pub fitted_slope: f64,
    /// `fitted_slope − 1` (the `L²` norm over a 2D ball adds one power of r).
    pub fitted_order: f64,
    pub identically_zero: bool,
}

/// The profile of `u` about `x0`; `radii` must be strictly decreasing.
pub fn norm_profile(u: &FemFunction, x0: &Point, radii: &[f64]) -> Result<NormProfile> {
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("radii must be strictly decreasing"));
    }
    let mut l2_norms = Vec::with_capacity(radii.len());
    let mut linf_norms = Vec::with_capacity(radii.len());
    for &r in radii {
        let ball = Disk::new(*x0, r);
        l2_norms.push(u.l2_norm_on(&ball)?);
        linf_norms.push(u.linf_norm_on(&ball));
    }
    let identically_zero = l2_norms.iter().all(|&n| n <= ZERO_NORM);
    let local_slopes = radii
        .windows(2)
        .zip(l2_norms.windows(2))
        .map(|(r, n)| (n[0] / n[1]).ln() / (r[0] / r[1]).ln())
        .collect();
    let floor = 5.0 * u.mesh().mesh_size();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, (&r, &n)) in radii.iter().zip(&l2_norms).enumerate() {
        if k > 0 && r >= floor && n > ZERO_NORM {
            xs.push(r);
            ys.push(n);
        }
    }
    let fitted_slope = if identically_zero {
        f64::NAN
    } else {
        fit_slope(&xs, &ys)
    };
    Ok(NormProfile {
        radii: radii.to_vec(),
        l2_norms,
        linf_norms,
        local_slopes,
        fit_window: xs,
        fitted_slope,
        fitted_order: fitted_slope - 1.0,
        identically_zero,
    })
}

/// `θ*` with `‖u‖_r = ‖u‖_ρ^θ ‖u‖_R^{1−θ}`, i.e.
/// `(ln n_R − ln n_r)/(ln n_R − ln n_ρ)`; `None` for degenerate norms.
pub fn three_spheres_exponent(n_rho: f64, n_r: f64, n_big: f64) -> Option<f64> {
    if !(n_rho > ZERO_NORM && n_r > ZERO_NORM && n_big > ZERO_NORM) {
        return None;
    }
    let den = n_big.ln() - n_rho.ln();
    if !(den > 0.0) {
        return None;
    }
    Some((n_big.ln() - n_r.ln()) / den)
}

fn stage_failure(stage: &str, resolution: usize, error: &Error) -> StageFailure {
    StageFailure {
        stage: stage.into(),
        resolution: Some(resolution),
        message: error.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedProfile {
    pub resolution: usize,
    pub mesh_size: f64,
    pub profile: NormProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishingReport {
    pub experiment: &'static str,
    pub coefficients: String,
    pub x0: [f64; 2],
    pub profiles: Vec<ResolvedProfile>,
    pub failure: Option<StageFailure>,
}

impl VanishingReport {
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["resolution", "r", "l2_norm", "linf_norm", "in_fit_window"]);
        for p in &self.profiles {
            let pr = &p.profile;
            for (k, &r) in pr.radii.iter().enumerate() {
                csv.row(&[
                    p.resolution.to_string(),
                    num(r),
                    num(pr.l2_norms[k]),
                    num(pr.linf_norms[k]),
                    pr.fit_window.contains(&r).to_string(),
                ]);
            }
        }
        for p in &self.profiles {
            csv.row(&[
                "fit".into(),
                p.resolution.to_string(),
                num(p.profile.fitted_slope),
                num(p.profile.fitted_order),
                if p.profile.identically_zero {
                    "identically_zero"
                } else {
                    ""
                }
                .into(),
            ]);
        }
        csv.finish()
    }
}

/// Runs `f` on every resolution's solution, stopping at the first failure.
fn per_resolution<T>(
    config: &ExperimentConfig,
    coeffs: &CoefficientSet,
    mut f: impl FnMut(usize, &FemFunction, &Point) -> Result<T>,
) -> (Vec<T>, Option<StageFailure>) {
    let disk = config.disk.disk();
    let recipe = config.solution.as_ref().expect("validated");
    let x0 = recipe.x0(&disk);
    let mut out = Vec::new();
    for &res in &config.resolutions {
        let u = match recipe.build(coeffs, &disk, res) {
            Ok(u) => u,
            Err(e) => return (out, Some(stage_failure("solution", res, &e))),
        };
        match f(res, &u, &x0) {
            Ok(v) => out.push(v),
            Err(e) => return (out, Some(stage_failure("norms", res, &e))),
        }
    }
    (out, None)
}

fn x0_of(config: &ExperimentConfig) -> [f64; 2] {
    let x0 = config.solution.as_ref().expect("validated").x0(&config.disk.disk());
    [x0.x, x0.y]
}

pub fn run_vanishing_order(config: &ExperimentConfig, coeffs: &CoefficientSet) -> Result<VanishingReport> {
    let (profiles, failure) = per_resolution(config, coeffs, |res, u, x0| {
        Ok(ResolvedProfile {
            resolution: res,
            mesh_size: u.mesh().mesh_size(),
            profile: norm_profile(u, x0, &config.radii)?,
        })
    });
    Ok(VanishingReport {
        experiment: "vanishing_order",
        coefficients: coeffs.name.clone(),
        x0: x0_of(config),
        profiles,
        failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingRow {
    pub resolution: usize,
    pub r: f64,
    pub norm_r: f64,
    pub norm_2r: f64,
    /// `‖u‖_{L²(B_{2r})}/‖u‖_{L²(B_r)}`; `None` when the denominator vanishes.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingReport {
    pub experiment: &'static str,
    pub coefficients: String,
    pub x0: [f64; 2],
    pub rows: Vec<DoublingRow>,
    /// Largest ratio per resolution.
    pub max_ratio: Vec<(usize, f64)>,
    pub failure: Option<StageFailure>,
}

impl DoublingReport {
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["resolution", "r", "norm_r", "norm_2r", "ratio", "flag"]);
        for row in &self.rows {
            csv.row(&[
                row.resolution.to_string(),
                num(row.r),
                num(row.norm_r),
                num(row.norm_2r),
                row.ratio.map(num).unwrap_or_else(|| "nan".into()),
                if row.ratio.is_none() { "degenerate" } else { "" }.into(),
            ]);
        }
        for (res, max) in &self.max_ratio {
            csv.row(&[
                "max_ratio".into(),
                res.to_string(),
                String::new(),
                String::new(),
                num(*max),
                String::new(),
            ]);
        }
        csv.finish()
    }
}

pub fn run_doubling(config: &ExperimentConfig, coeffs: &CoefficientSet) -> Result<DoublingReport> {
    let (rows, failure) = per_resolution(config, coeffs, |res, u, x0| {
        config
            .radii
            .iter()
            .map(|&r| {
                let norm_r = u.l2_norm_on(&Disk::new(*x0, r))?;
                let norm_2r = u.l2_norm_on(&Disk::new(*x0, 2.0 * r))?;
                Ok(DoublingRow {
                    resolution: res,
                    r,
                    norm_r,
                    norm_2r,
                    ratio: (norm_r > ZERO_NORM).then(|| norm_2r / norm_r),
                })
            })
            .collect::<Result<Vec<_>>>()
    });
    let max_ratio = rows
        .iter()
        .map(|rows| {
            let res = rows.first().map(|r| r.resolution).unwrap_or(0);
            (res, rows.iter().filter_map(|r| r.ratio).fold(f64::NAN, f64::max))
        })
        .collect();
    Ok(DoublingReport {
        experiment: "doubling",
        coefficients: coeffs.name.clone(),
        x0: x0_of(config),
        rows: rows.into_iter().flatten().collect(),
        max_ratio,
        failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreeSpheresRow {
    pub resolution: usize,
    pub rho: f64,
    pub r: f64,
    pub big_r: f64,
    pub norm_rho: f64,
    pub norm_r: f64,
    pub norm_big_r: f64,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreeSpheresReport {
    pub experiment: &'static str,
    pub coefficients: String,
    pub x0: [f64; 2],
    pub rows: Vec<ThreeSpheresRow>,
    /// Smallest `θ*` per resolution.
    pub min_theta: Vec<(usize, f64)>,
    pub failure: Option<StageFailure>,
}

impl ThreeSpheresReport {
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&[
            "resolution",
            "rho",
            "r",
            "R",
            "norm_rho",
            "norm_r",
            "norm_R",
            "theta",
            "flag",
        ]);
        for row in &self.rows {
            csv.row(&[
                row.resolution.to_string(),
                num(row.rho),
                num(row.r),
                num(row.big_r),
                num(row.norm_rho),
                num(row.norm_r),
                num(row.norm_big_r),
                row.theta.map(num).unwrap_or_else(|| "nan".into()),
                if row.theta.is_none() { "degenerate" } else { "" }.into(),
            ]);
        }
        for (res, min) in &self.min_theta {
            let mut cells = vec!["min_theta".to_string(), res.to_string()];
            cells.extend(std::iter::repeat_n(String::new(), 5));
            cells.push(num(*min));
            cells.push(String::new());
            csv.row(&cells);
        }
        csv.finish()
    }
}

pub fn run_three_spheres(
    config: &ExperimentConfig,
    coeffs: &CoefficientSet,
    triples: &[[f64; 3]],
) -> Result<ThreeSpheresReport> {
    let (rows, failure) = per_resolution(config, coeffs, |res, u, x0| {
        triples
            .iter()
            .map(|&[rho, r, big_r]| {
                let n = |radius: f64| u.l2_norm_on(&Disk::new(*x0, radius));
                let (norm_rho, norm_r, norm_big_r) = (n(rho)?, n(r)?, n(big_r)?);
                Ok(ThreeSpheresRow {
                    resolution: res,
                    rho,
                    r,
                    big_r,
                    norm_rho,
                    norm_r,
                    norm_big_r,
                    theta: three_spheres_exponent(norm_rho, norm_r, norm_big_r),
                })
            })
            .collect::<Result<Vec<_>>>()
    });
    let min_theta = rows
        .iter()
        .map(|rows| {
            let res = rows.first().map(|r| r.resolution).unwrap_or(0);
            (res, rows.iter().filter_map(|r| r.theta).fold(f64::NAN, f64::min))
        })
        .collect();
    Ok(ThreeSpheresReport {
        experiment: "three_spheres",
        coefficients: coeffs.name.clone(),
        x0: x0_of(config),
        rows: rows.into_iter().flatten().collect(),
        min_theta,
        failure,
    })
}
