//! Spectral Cauchy and Beurling transforms on a periodic square cell.
//!
//! The cell has side `4R` and is centered on the disk `B_R(c)`. For a grid
//! field `g`, `P[g] = u + ḡ₀·conj(z − c)` where `ḡ₀` is the mean of `g` and
//! `u` is the periodic solution of `∂_z̄ u = g − ḡ₀`. The Beurling transform
//! is `S[g] = ∂_z P[g]`.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::{Complex64, Error, Point, Result};

/// A uniform `n × n` grid on a periodic cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    n: usize,
    center: Point,
    side: f64,
}

impl PeriodicGrid {
    /// The cell of side `4·radius` about `center`; `n` must be a power of two.
    pub fn new(center: Point, radius: f64, n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::invalid(format!("FFT grid must be a power of two ≥ 8, got {n}")));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("cell radius must be positive"));
        }
        Ok(PeriodicGrid {
            n,
            center,
            side: 4.0 * radius,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        let h = self.spacing();
        self.center + Point::new(i as f64 * h - 0.5 * self.side, j as f64 * h - 0.5 * self.side)
    }

    /// Samples `g` at every node (row-major, `x` fastest).
    pub fn sample(&self, mut g: impl FnMut(Point) -> Complex64) -> GridField {
        let mut values = Vec::with_capacity(self.n * self.n);
        for j in 0..self.n {
            for i in 0..self.n {
                values.push(g(self.node(i, j)));
            }
        }
        GridField { grid: *self, values }
    }

    fn wavenumber(&self, m: usize) -> f64 {
        let m = if m <= self.n / 2 {
            m as f64
        } else {
            m as f64 - self.n as f64
        };
        2.0 * PI * m / self.side
    }
}

/// Complex samples on a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: PeriodicGrid,
    values: Vec<Complex64>,
}

impl GridField {
    pub(crate) fn from_values(grid: PeriodicGrid, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.n * grid.n);
        GridField { grid, values }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.grid.n + i]
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    /// Periodic bilinear interpolation.
    pub fn interpolate(&self, x: &Point) -> Complex64 {
        let g = &self.grid;
        let h = g.spacing();
        let origin = g.center - Point::new(0.5 * g.side, 0.5 * g.side);
        let u = ((x.x - origin.x) / h).rem_euclid(g.n as f64);
        let v = ((x.y - origin.y) / h).rem_euclid(g.n as f64);
        let (i, j) = ((u.floor() as usize) % g.n, (v.floor() as usize) % g.n);
        let (fx, fy) = (u - u.floor(), v - v.floor());
        let (i1, j1) = ((i + 1) % g.n, (j + 1) % g.n);
        self.at(i, j) * ((1.0 - fx) * (1.0 - fy))
            + self.at(i1, j) * (fx * (1.0 - fy))
            + self.at(i, j1) * ((1.0 - fx) * fy)
            + self.at(i1, j1) * (fx * fy)
    }

    pub fn zip_map(&self, other: &GridField, f: impl Fn(Complex64, Complex64) -> Complex64) -> GridField {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        GridField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Largest `|self − other|` over nodes within `radius` of the cell center.
    pub fn max_diff_within(&self, other: &GridField, radius: f64) -> f64 {
        let n = self.grid.n;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                if (self.grid.node(i, j) - self.grid.center).norm() <= radius {
                    worst = worst.max((self.at(i, j) - other.at(i, j)).norm());
                }
            }
        }
        worst
    }

    fn fft2(&self, inverse: bool) -> Vec<Complex64> {
        let n = self.grid.n;
        let mut planner = FftPlanner::<f64>::new();
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let mut data = self.values.clone();
        for row in data.chunks_mut(n) {
            fft.process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                column[j] = data[j * n + i];
            }
            fft.process(&mut column);
            for j in 0..n {
                data[j * n + i] = column[j];
            }
        }
        if inverse {
            let scale = 1.0 / (n * n) as f64;
            data.iter_mut().for_each(|v| *v *= scale);
        }
        data
    }

    /// Applies the Fourier multiplier `symbol(kx, ky)`.
    fn multiply(&self, symbol: impl Fn(f64, f64) -> Complex64) -> GridField {
        let n = self.grid.n;
        let mut spectrum = self.fft2(false);
        for j in 0..n {
            let ky = self.grid.wavenumber(j);
            for i in 0..n {
                let kx = self.grid.wavenumber(i);
                spectrum[j * n + i] *= symbol(kx, ky);
            }
        }
        let out = GridField {
            grid: self.grid,
            values: spectrum,
        };
        GridField {
            grid: self.grid,
            values: out.fft2(true),
        }
    }

    /// Spectral `∂_z̄` of the periodic field.
    pub fn dbar(&self) -> GridField {
        self.multiply(|kx, ky| Complex64::new(-ky, kx) * 0.5)
    }

    /// Spectral `∂_z` of the periodic field.
    pub fn dz(&self) -> GridField {
        self.multiply(|kx, ky| Complex64::new(ky, kx) * 0.5)
    }
}

/// `P[g]` as its periodic part plus `mean · conj(z − c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyTransform {
    pub periodic: GridField,
    pub mean: Complex64,
}

impl CauchyTransform {
    fn linear_part(&self, x: &Point) -> Complex64 {
        let d = x - self.periodic.grid.center;
        self.mean * Complex64::new(d.x, -d.y)
    }

    pub fn eval(&self, x: &Point) -> Complex64 {
        self.periodic.interpolate(x) + self.linear_part(x)
    }

    /// Node values.
    pub fn to_grid(&self) -> GridField {
        let g = self.periodic.grid;
        let mut out = g.sample(|x| self.linear_part(&x));
        for (o, p) in out.values.iter_mut().zip(&self.periodic.values) {
            *o += p;
        }
        out
    }

    /// Discrete `∂_z̄ P[g]`: spectral on the periodic part, exact on the rest.
    pub fn dbar(&self) -> GridField {
        let mut out = self.periodic.dbar();
        out.values.iter_mut().for_each(|v| *v += self.mean);
        out
    }

    /// Discrete `∂_z P[g]` (the linear part is anti-holomorphic).
    pub fn dz(&self) -> GridField {
        self.periodic.dz()
    }
}

pub fn cauchy_transform(g: &GridField) -> CauchyTransform {
    let mean = g.mean();
    // 1/σ with σ = i(kx + i ky)/2 the symbol of ∂_z̄; the zero mode is the mean.
    let periodic = g.multiply(|kx, ky| {
        if kx == 0.0 && ky == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0) / (Complex64::new(-ky, kx) * 0.5)
        }
    });
    CauchyTransform { periodic, mean }
}

/// `S[g] = ∂_z P[g]`, an isometry on mean-free periodic fields.
pub fn beurling(g: &GridField) -> GridField {
    g.multiply(|kx, ky| {
        if kx == 0.0 && ky == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(ky, kx) / Complex64::new(-ky, kx)
        }
    })
}
