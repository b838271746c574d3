//! Experiment runner behind the `uc2d` binary.
//!
//! An experiment is described by an [`ExperimentConfig`] (JSON, schema in
//! `docs/config.md`) and writes `report.json` plus one CSV into an output
//! directory. Every output is a pure function of the config, so reruns are
//! byte-identical.

mod contraction;
mod pipeline;
mod profile;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fields::{builtin, CoefficientSet, Raster};
use crate::mesh::Disk;
use crate::reduction::ReductionParameters;
use crate::{Error, Point, Result};

pub use contraction::{run_contraction_scaling, ContractionReport, ContractionRow};
pub use pipeline::{run_pipeline, PipelineLevel, PipelineReport, SimilaritySummary, StageFailure};
pub use profile::{
    fit_slope, norm_profile, run_doubling, run_three_spheres, run_vanishing_order, three_spheres_exponent,
    DoublingReport, DoublingRow, NormProfile, SolutionRecipe, ThreeSpheresReport, ThreeSpheresRow, VanishingReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Pipeline,
    ContractionScaling,
    Doubling,
    ThreeSpheres,
    VanishingOrder,
}

impl ExperimentKind {
    /// Name of the CSV written next to `report.json` (none for the pipeline).
    pub fn csv_name(self) -> Option<&'static str> {
        match self {
            ExperimentKind::Pipeline => None,
            ExperimentKind::ContractionScaling => Some("contraction.csv"),
            ExperimentKind::Doubling => Some("doubling.csv"),
            ExperimentKind::ThreeSpheres => Some("three_spheres.csv"),
            ExperimentKind::VanishingOrder => Some("vanishing_order.csv"),
        }
    }
}

/// Where the coefficients come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CoefficientSpec {
    Builtin {
        builtin: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Raster {
        raster: PathBuf,
        #[serde(default = "default_q")]
        q: f64,
    },
}

fn default_q() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

impl DiskSpec {
    pub fn disk(&self) -> Disk {
        Disk::new(Point::new(self.center[0], self.center[1]), self.radius)
    }
}

impl Default for DiskSpec {
    fn default() -> Self {
        DiskSpec {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the CLI subcommand when present.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    pub coefficients: CoefficientSpec,
    #[serde(default)]
    pub disk: DiskSpec,
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub reduction: ReductionParameters,
    #[serde(default)]
    pub radii: Vec<f64>,
    /// Explicit `(ρ, r, R)` triples; defaults to consecutive radii.
    #[serde(default)]
    pub triples: Vec<[f64; 3]>,
    #[serde(default)]
    pub solution: Option<SolutionRecipe>,
    #[serde(default)]
    pub seed: u64,
    /// Factorization test pairs per resolution.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Power-iteration probes per radius.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Multiplies `B`, `C` and `d`.
    #[serde(default = "default_scale")]
    pub lower_order_scale: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_trials() -> usize {
    20
}

fn default_probes() -> usize {
    3
}

fn default_scale() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a config; relative raster paths are resolved against the
    /// config's directory.
    pub fn read(path: &Path) -> Result<Self> {
        let mut config = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let CoefficientSpec::Raster { raster, .. } = &mut config.coefficients {
            if raster.is_relative() {
                if let Some(dir) = path.parent() {
                    *raster = dir.join(&*raster);
                }
            }
        }
        Ok(config)
    }

    /// Checks the schedule invariants for `kind`.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        if let Some(declared) = self.experiment {
            if declared != kind {
                return Err(Error::invalid(format!(
                    "config declares experiment {declared:?} but {kind:?} was requested"
                )));
            }
        }
        let disk = self.disk.disk();
        if !(disk.radius > 0.0) || !disk.center.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("disk radius must be positive and the center finite"));
        }
        if self.resolutions.is_empty() {
            return Err(Error::invalid("at least one resolution is required"));
        }
        if self.resolutions[0] < 4 || self.resolutions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("resolutions must be ≥ 4 and strictly increasing"));
        }
        if self.radii.windows(2).any(|w| w[1] >= w[0]) || self.radii.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::invalid("radii must be positive and strictly decreasing"));
        }
        if !(self.lower_order_scale.is_finite()) {
            return Err(Error::invalid("lower_order_scale must be finite"));
        }
        match kind {
            ExperimentKind::Pipeline => {
                if self.trials == 0 {
                    return Err(Error::invalid("trials must be positive"));
                }
            }
            ExperimentKind::ContractionScaling => {
                if self.radii.len() < 4 {
                    return Err(Error::invalid("contraction scaling needs at least 4 radii"));
                }
                if self.radii[0] > disk.radius {
                    return Err(Error::invalid("radii must lie within the disk"));
                }
                if self.probes == 0 {
                    return Err(Error::invalid("probes must be positive"));
                }
            }
            ExperimentKind::Doubling | ExperimentKind::ThreeSpheres | ExperimentKind::VanishingOrder => {
                let recipe = self
                    .solution
                    .as_ref()
                    .ok_or_else(|| Error::invalid("a solution recipe is required"))?;
                let x0 = recipe.x0(&disk);
                let reach = disk.radius - (x0 - disk.center).norm();
                if !(reach > 0.0) {
                    return Err(Error::invalid("x0 must lie inside the disk"));
                }
                let largest = match kind {
                    ExperimentKind::Doubling => 2.0 * self.radii.first().copied().unwrap_or(0.0),
                    ExperimentKind::ThreeSpheres => {
                        self.three_spheres_triples()?.iter().map(|t| t[2]).fold(0.0, f64::max)
                    }
                    _ => self.radii.first().copied().unwrap_or(0.0),
                };
                if self.radii.is_empty() && self.triples.is_empty() {
                    return Err(Error::invalid("a radii schedule is required"));
                }
                if largest > reach * (1.0 + 1e-12) {
                    return Err(Error::invalid(format!(
                        "the largest ball (radius {largest}) about x0 leaves the disk"
                    )));
                }
            }
        }
        Ok(())
    }

    fn three_spheres_triples(&self) -> Result<Vec<[f64; 3]>> {
        let triples: Vec<[f64; 3]> = if self.triples.is_empty() {
            self.radii.windows(3).map(|w| [w[2], w[1], w[0]]).collect()
        } else {
            self.triples.clone()
        };
        if triples.is_empty() {
            return Err(Error::invalid("three-spheres needs at least one (ρ, r, R) triple"));
        }
        if triples.iter().any(|t| !(0.0 < t[0] && t[0] < t[1] && t[1] < t[2])) {
            return Err(Error::invalid("every triple must satisfy 0 < ρ < r < R"));
        }
        Ok(triples)
    }

    /// The coefficient set, with lower-order terms scaled.
    pub fn coefficient_set(&self) -> Result<CoefficientSet> {
        let set = match &self.coefficients {
            CoefficientSpec::Builtin { builtin: name, params } => builtin(name, params)?,
            CoefficientSpec::Raster { raster, q } => {
                let name = raster
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("raster")
                    .to_string();
                Raster::read(raster)?.to_coefficients(name, *q)?
            }
        };
        Ok(if self.lower_order_scale == 1.0 {
            set
        } else {
            set.scale_lower_order(self.lower_order_scale)
        })
    }
}

/// What [`run_experiment`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub report: String,
    pub csv: Option<String>,
    /// `false` when a stage failed (the report records which).
    pub success: bool,
}

impl Outputs {
    /// Writes `report.json` and the CSV (if any) into `dir`.
    pub fn write(&self, kind: ExperimentKind, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), &self.report)?;
        if let (Some(csv), Some(name)) = (&self.csv, kind.csv_name()) {
            std::fs::write(dir.join(name), csv)?;
        }
        Ok(())
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Validates `config` for `kind` and runs it. `Err` means the config is
/// invalid; stage failures come back as `Ok` with `success == false`.
pub fn run_experiment(kind: ExperimentKind, config: &ExperimentConfig) -> Result<Outputs> {
    config.validate(kind)?;
    let coeffs = config.coefficient_set()?;
    match kind {
        ExperimentKind::Pipeline => {
            let report = run_pipeline(config, &coeffs)?;
            Ok(Outputs {
                success: report.failure.is_none(),
                report: to_json(&report)?,
                csv: None,
            })
        }
        ExperimentKind::ContractionScaling => {
            let report = run_contraction_scaling(config, &coeffs)?;
            Ok(Outputs {
                success: report.failure.is_none(),
                csv: Some(report.to_csv()),
                report: to_json(&report)?,
            })
        }
        ExperimentKind::VanishingOrder => {
            let report = run_vanishing_order(config, &coeffs)?;
            Ok(Outputs {
                success: report.failure.is_none(),
                csv: Some(report.to_csv()),
                report: to_json(&report)?,
            })
        }
        ExperimentKind::Doubling => {
            let report = run_doubling(config, &coeffs)?;
            Ok(Outputs {
                success: report.failure.is_none(),
                csv: Some(report.to_csv()),
                report: to_json(&report)?,
            })
        }
        ExperimentKind::ThreeSpheres => {
            let report = run_three_spheres(config, &coeffs, &config.three_spheres_triples()?)?;
            Ok(Outputs {
                success: report.failure.is_none(),
                csv: Some(report.to_csv()),
                report: to_json(&report)?,
            })
        }
    }
}

/// A CSV table with a header, data rows and tagged footer rows.
pub(crate) struct Csv {
    text: String,
}

impl Csv {
    pub(crate) fn new(header: &[&str]) -> Self {
        Csv {
            text: header.join(",") + "\n",
        }
    }

    pub(crate) fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub(crate) fn finish(self) -> String {
        self.text
    }
}

/// Formats a float with the shortest round-trip representation; non-finite
/// values print as `nan`/`inf`/`-inf`.
pub(crate) fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}
