//! Similarity factor `s` with `f = e^s g`, where `g` solves a dilatation-only
//! equation.
//!
//! Along `f` the full system reads `f_z̄ = q f_z + γ f` with
//!
//! ```text
//! q = μ + ν conj(f_z)/f_z,   γ = α + β conj(f)/f,
//! ```
//!
//! so any `s` with `s_z̄ = q s_z + γ` makes `g = e^{−s} f` satisfy
//! `g_z̄ = q g_z`. We take `s = P[h]` where `h = γ + q S[h]` is summed as a
//! Neumann series (`|q| ≤ k < 1` and `S` is an `L²` isometry). When
//! `μ = ν = 0` this is simply `s = P[γ]`.

use std::sync::Arc;

use serde::Serialize;

use super::cauchy::{beurling, cauchy_transform, CauchyTransform, GridField, PeriodicGrid};
use super::{wirtinger, BeltramiData};
use crate::mesh::{Disk, FemFunction, SUBSAMPLE_16};
use crate::{Complex64, Error, Point, Result};

/// Tuning for [`similarity_factor_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityOptions {
    /// `|f|` below this replaces `conj(f)/f` by 0 (so `γ = α` there).
    pub zero_threshold: f64,
    /// FFT grid size; `None` picks the power of two ≥ 4× the mesh resolution.
    pub grid: Option<usize>,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Residuals are compared on `B_{ρR}` for this `ρ`; the zero extension of
    /// `q` and `γ` makes `s_z` log-singular on the circle itself.
    pub interior_fraction: f64,
}

impl SimilarityOptions {
    /// Defaults with the threshold `1e−6 ‖f‖_∞`.
    pub fn for_data(data: &BeltramiData) -> Self {
        SimilarityOptions {
            zero_threshold: 1e-6 * data.f.max_modulus(),
            grid: None,
            tolerance: 1e-12,
            max_iter: 500,
            interior_fraction: 0.75,
        }
    }
}

/// Sampled modulus of continuity of `s` on the disk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub distances: Vec<f64>,
    /// `max |s(x) − s(y)|` over grid pairs at each distance.
    pub oscillations: Vec<f64>,
    /// Least-squares slope of `log osc` against `log distance`.
    pub exponent: f64,
}

#[derive(Debug, Clone)]
pub struct SimilarityFactor {
    pub s: FemFunction<Complex64>,
    pub transform: CauchyTransform,
    /// Neumann iterations used.
    pub iterations: usize,
    /// Residual of the input system on the interior disk, as in
    /// [`super::beltrami_residual_on`].
    pub input_residual: f64,
    /// Residual of `g_z̄ = q g_z` for `g = e^{−s}f`, measured with the weight
    /// `|e^s|` so that it is directly comparable with the input residual.
    pub divided_residual: f64,
    pub holder: HolderReport,
}

/// [`similarity_factor_with`] with default options and the given threshold.
pub fn similarity_factor(data: &BeltramiData, zero_threshold: f64) -> Result<SimilarityFactor> {
    let options = SimilarityOptions {
        zero_threshold,
        ..SimilarityOptions::for_data(data)
    };
    similarity_factor_with(data, &options)
}

struct Coefficients {
    q: Complex64,
    gamma: Complex64,
}

fn quotient(w: Complex64, threshold: f64) -> Complex64 {
    if w.norm() > threshold {
        w.conj() / w
    } else {
        Complex64::new(0.0, 0.0)
    }
}

fn coefficients(
    data: &BeltramiData,
    fz: Complex64,
    f: Complex64,
    x: Point,
    options: &SimilarityOptions,
    fz_floor: f64,
) -> Coefficients {
    Coefficients {
        q: (data.mu)(x) + (data.nu)(x) * quotient(fz, fz_floor),
        gamma: (data.alpha)(x) + (data.beta)(x) * quotient(f, options.zero_threshold),
    }
}

pub fn similarity_factor_with(data: &BeltramiData, options: &SimilarityOptions) -> Result<SimilarityFactor> {
    if !(options.zero_threshold > 0.0) {
        return Err(Error::invalid("zero_threshold must be positive"));
    }
    if !(options.interior_fraction > 0.0 && options.interior_fraction <= 1.0) {
        return Err(Error::invalid("interior_fraction must lie in (0, 1]"));
    }
    let mesh = Arc::clone(data.mesh());
    let n = options
        .grid
        .unwrap_or_else(|| (4 * mesh.resolution()).next_power_of_two().max(64));
    let grid = PeriodicGrid::new(mesh.center(), mesh.radius(), n)?;
    let (fz, fzb) = wirtinger(&data.f);
    let fz_floor = 1e-12 * fz.values.iter().map(|v| v.norm()).fold(0.0, f64::max);

    // q and γ on the grid, extended by zero off the triangulation
    let zero = Complex64::new(0.0, 0.0);
    let mut q_grid = Vec::with_capacity(n * n);
    let gamma = grid.sample(|x| match mesh.locate(&x) {
        Some((tri, bary)) => {
            let c = coefficients(data, fz.values[tri], data.f.eval_in(tri, bary), x, options, fz_floor);
            q_grid.push(c.q);
            c.gamma
        }
        None => {
            q_grid.push(zero);
            zero
        }
    });

    let norm = |g: &GridField| g.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut h = gamma.clone();
    let mut iterations = 0;
    let scale = norm(&gamma);
    if scale > 0.0 && q_grid.iter().any(|q| q.norm() > 0.0) {
        let mut converged = false;
        let mut history = Vec::new();
        for k in 1..=options.max_iter {
            let sh = beurling(&h);
            let next = GridField::from_values(
                grid,
                gamma
                    .values()
                    .iter()
                    .zip(sh.values())
                    .zip(&q_grid)
                    .map(|((g, s), q)| g + q * s)
                    .collect(),
            );
            let change = norm(&next.zip_map(&h, |a, b| a - b));
            h = next;
            iterations = k;
            history.push(change / scale);
            if change <= options.tolerance * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NotConverged {
                iterations: options.max_iter,
                history,
            });
        }
    }
    let transform = cauchy_transform(&h);
    let s = FemFunction::new(
        Arc::clone(&mesh),
        mesh.vertices().iter().map(|x| transform.eval(x)).collect(),
    )?;

    // g = e^{−s} f, differentiated as a P1 function
    let g = FemFunction::new(
        Arc::clone(&mesh),
        s.values()
            .iter()
            .zip(data.f.values())
            .map(|(s, f)| (-s).exp() * f)
            .collect(),
    )?;
    let (gz, gzb) = wirtinger(&g);
    let interior = Disk::new(mesh.center(), options.interior_fraction * mesh.radius());
    let (mut num, mut den) = (0.0, 0.0);
    for tri in 0..mesh.triangle_count() {
        if !interior.contains(&mesh.centroid(tri)) {
            continue;
        }
        let area = mesh.area(tri);
        for qp in &SUBSAMPLE_16 {
            let x = mesh.point_at(tri, qp.bary);
            let f = data.f.eval_in(tri, qp.bary);
            let c = coefficients(data, fz.values[tri], f, x, options, fz_floor);
            let weight = s.eval_in(tri, qp.bary).exp().norm();
            let r = (gzb.values[tri] - c.q * gz.values[tri]) * weight;
            let w = qp.weight * area;
            num += w * r.norm_sqr();
            den += w * (fzb.values[tri].norm() + f.norm()).powi(2);
        }
    }
    let divided = if den == 0.0 { 0.0 } else { (num / den).sqrt() };
    let input = super::beltrami_residual_on(data, &interior);
    if divided > 10.0 * input + 1e-10 {
        return Err(Error::SimilarityFailure { divided, input });
    }

    let holder = holder_report(&transform.to_grid(), mesh.radius());
    Ok(SimilarityFactor {
        s,
        transform,
        iterations,
        input_residual: input,
        divided_residual: divided,
        holder,
    })
}

/// Oscillation of `s` over axis-aligned node pairs at distances
/// `Δ, 2Δ, 4Δ, …` below `radius/2`, both nodes within the disk.
fn holder_report(s: &GridField, radius: f64) -> HolderReport {
    let grid = *s.grid();
    let n = grid.size();
    let (mut distances, mut oscillations) = (Vec::new(), Vec::new());
    let inside = |i: usize, j: usize| (grid.node(i, j) - grid.center()).norm() <= radius;
    let mut step = 1;
    while (step as f64) * grid.spacing() <= 0.5 * radius {
        let mut osc: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                if !inside(i, j) {
                    continue;
                }
                if i + step < n && inside(i + step, j) {
                    osc = osc.max((s.at(i + step, j) - s.at(i, j)).norm());
                }
                if j + step < n && inside(i, j + step) {
                    osc = osc.max((s.at(i, j + step) - s.at(i, j)).norm());
                }
            }
        }
        distances.push(step as f64 * grid.spacing());
        oscillations.push(osc);
        step *= 2;
    }
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .zip(&oscillations)
        .filter(|(_, &o)| o > 0.0)
        .map(|(d, o)| (d.ln(), o.ln()))
        .collect();
    let exponent = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    HolderReport {
        distances,
        oscillations,
        exponent,
    }
}
