//! Text raster files: gridded samples with bilinear interpolation.
//!
//! ```text
//! uc2d-raster 1
//! grid <nx> <ny>
//! bbox <xmin> <xmax> <ymin> <ymax>
//! channels <name> ...
//! <one line per node, row-major (x fastest), one value per channel>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Coefficient rasters
//! use the channel names `a11 a12 a21 a22 b1 b2 c1 c2 d`; a missing `aij`
//! channel defaults to the identity entry, every other missing channel to 0.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::CoefficientSet;
use crate::{Error, Mat2, Point, Result};

pub const COEFFICIENT_CHANNELS: [&str; 9] = ["a11", "a12", "a21", "a22", "b1", "b2", "c1", "c2", "d"];

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub nx: usize,
    pub ny: usize,
    /// `[xmin, xmax, ymin, ymax]`.
    pub bbox: [f64; 4],
    pub channels: Vec<String>,
    /// Node-major: the channels of node `(i, j)` start at `(j·nx + i)·channels`.
    pub data: Vec<f64>,
}

fn raster_err(line: usize, message: impl Into<String>) -> Error {
    Error::Raster {
        line,
        message: message.into(),
    }
}

impl Raster {
    pub fn new(nx: usize, ny: usize, bbox: [f64; 4], channels: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(raster_err(0, "grid needs at least 2 nodes per direction"));
        }
        if !(bbox[1] > bbox[0] && bbox[3] > bbox[2]) {
            return Err(raster_err(0, "empty bounding box"));
        }
        if channels.is_empty() {
            return Err(raster_err(0, "no channels"));
        }
        if data.len() != nx * ny * channels.len() {
            return Err(raster_err(
                0,
                format!("expected {} values, got {}", nx * ny * channels.len(), data.len()),
            ));
        }
        Ok(Raster {
            nx,
            ny,
            bbox,
            channels,
            data,
        })
    }

    /// Samples `g` at the grid nodes.
    pub fn sample(
        nx: usize,
        ny: usize,
        bbox: [f64; 4],
        channels: Vec<String>,
        g: impl Fn(Point) -> Vec<f64>,
    ) -> Result<Self> {
        let nc = channels.len();
        let mut data = Vec::with_capacity(nx * ny * nc);
        for j in 0..ny {
            for i in 0..nx {
                let x = Point::new(
                    bbox[0] + (bbox[1] - bbox[0]) * i as f64 / (nx - 1) as f64,
                    bbox[2] + (bbox[3] - bbox[2]) * j as f64 / (ny - 1) as f64,
                );
                let v = g(x);
                assert_eq!(v.len(), nc, "sampler returned the wrong channel count");
                data.extend(v);
            }
        }
        Raster::new(nx, ny, bbox, channels, data)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<(usize, Vec<&str>)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| raster_err(0, format!("missing `{key}` line")))?;
            let mut words = line.split_whitespace();
            if words.next() != Some(key) {
                return Err(raster_err(no, format!("expected `{key}`")));
            }
            Ok((no, words.collect()))
        };
        let (no, version) = header("uc2d-raster")?;
        if version != ["1"] {
            return Err(raster_err(no, "unsupported raster version"));
        }
        let (no, grid) = header("grid")?;
        let dims: Vec<usize> = grid
            .iter()
            .map(|w| w.parse().map_err(|_| raster_err(no, format!("bad grid size `{w}`"))))
            .collect::<Result<_>>()?;
        let [nx, ny] = dims[..] else {
            return Err(raster_err(no, "grid needs two sizes"));
        };
        let (no, bb) = header("bbox")?;
        let bb: Vec<f64> = bb
            .iter()
            .map(|w| w.parse().map_err(|_| raster_err(no, format!("bad number `{w}`"))))
            .collect::<Result<_>>()?;
        let [x0, x1, y0, y1] = bb[..] else {
            return Err(raster_err(no, "bbox needs four numbers"));
        };
        let (no, names) = header("channels")?;
        let channels: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        if channels.is_empty() {
            return Err(raster_err(no, "no channels"));
        }
        let mut data = Vec::with_capacity(nx * ny * channels.len());
        for (no, line) in lines {
            let before = data.len();
            for w in line.split_whitespace() {
                let v: f64 = w.parse().map_err(|_| raster_err(no, format!("bad number `{w}`")))?;
                data.push(v);
            }
            if data.len() - before != channels.len() {
                return Err(raster_err(no, format!("expected {} values per node", channels.len())));
            }
        }
        Raster::new(nx, ny, [x0, x1, y0, y1], channels, data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Raster::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes in the format accepted by [`Raster::parse`]; floats use the
    /// shortest round-trip representation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "uc2d-raster 1");
        let _ = writeln!(out, "grid {} {}", self.nx, self.ny);
        let [a, b, c, d] = self.bbox;
        let _ = writeln!(out, "bbox {a:?} {b:?} {c:?} {d:?}");
        let _ = writeln!(out, "channels {}", self.channels.join(" "));
        for node in self.data.chunks(self.channels.len()) {
            let row: Vec<String> = node.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Bilinear interpolation of channel `ch`; points outside the box are
    /// clamped onto it.
    pub fn interpolate(&self, ch: usize, x: Point) -> f64 {
        let nc = self.channels.len();
        let [x0, x1, y0, y1] = self.bbox;
        let locate = |t: f64, lo: f64, hi: f64, n: usize| {
            let s = ((t - lo) / (hi - lo)).clamp(0.0, 1.0) * (n - 1) as f64;
            let i = (s.floor() as usize).min(n - 2);
            (i, s - i as f64)
        };
        let (i, fx) = locate(x.x, x0, x1, self.nx);
        let (j, fy) = locate(x.y, y0, y1, self.ny);
        let at = |i: usize, j: usize| self.data[(j * self.nx + i) * nc + ch];
        (1.0 - fy) * ((1.0 - fx) * at(i, j) + fx * at(i + 1, j))
            + fy * ((1.0 - fx) * at(i, j + 1) + fx * at(i + 1, j + 1))
    }

    /// Coefficient set backed by this raster.
    pub fn to_coefficients(self, name: impl Into<String>, q: f64) -> Result<CoefficientSet> {
        for c in &self.channels {
            if !COEFFICIENT_CHANNELS.contains(&c.as_str()) {
                return Err(raster_err(
                    0,
                    format!(
                        "unknown coefficient channel `{c}` (expected a subset of {})",
                        COEFFICIENT_CHANNELS.join(" ")
                    ),
                ));
            }
        }
        if !(q > 2.0) {
            return Err(Error::invalid(format!("q must exceed 2, got {q}")));
        }
        let raster = Arc::new(self);
        let idx = COEFFICIENT_CHANNELS.map(|c| raster.channel_index(c));
        let channel = move |k: usize, default: f64| {
            let r = Arc::clone(&raster);
            move |x: Point| idx[k].map_or(default, |ch| r.interpolate(ch, x))
        };
        let (a11, a12, a21, a22) = (channel(0, 1.0), channel(1, 0.0), channel(2, 0.0), channel(3, 1.0));
        let (b1, b2, c1, c2, d) = (
            channel(4, 0.0),
            channel(5, 0.0),
            channel(6, 0.0),
            channel(7, 0.0),
            channel(8, 0.0),
        );
        Ok(
            CoefficientSet::principal(name, Arc::new(move |x| Mat2::new(a11(x), a12(x), a21(x), a22(x))))
                .with_b(Arc::new(move |x| Point::new(b1(x), b2(x))))
                .with_c(Arc::new(move |x| Point::new(c1(x), c2(x))))
                .with_d(Arc::new(d))
                .with_q(q),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> Raster {
        Raster::sample(5, 4, [-1.0, 1.0, -2.0, 2.0], vec!["a11".into(), "b2".into()], |x| {
            vec![2.0 + 0.5 * x.x - 0.25 * x.y, x.x * 3.0]
        })
        .unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let r = linear();
        let back = Raster::parse(&r.to_text()).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn bilinear_reproduces_affine_data() {
        let r = linear();
        for &(x, y) in &[(0.13, -0.4), (-0.99, 1.7), (0.5, 0.5)] {
            let v = r.interpolate(0, Point::new(x, y));
            assert!((v - (2.0 + 0.5 * x - 0.25 * y)).abs() < 1e-14);
        }
        // clamped outside the box
        assert!((r.interpolate(1, Point::new(5.0, 0.0)) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn coefficient_defaults() {
        let set = linear().to_coefficients("r", 4.0).unwrap();
        let x = Point::new(0.2, 0.1);
        let a = (set.a)(x);
        assert!((a[(0, 0)] - (2.0 + 0.1 - 0.025)).abs() < 1e-14);
        assert_eq!(a[(1, 1)], 1.0);
        assert_eq!(a[(0, 1)], 0.0);
        assert!(((set.b)(x).y - 0.6).abs() < 1e-14);
        assert_eq!((set.d)(x), 0.0);
    }

    #[test]
    fn malformed_files_report_lines() {
        let bad = "uc2d-raster 1\ngrid 2 2\nbbox 0 1 0 1\nchannels d\n1\n2\nx\n4\n";
        match Raster::parse(bad) {
            Err(Error::Raster { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(Raster::parse("uc2d-raster 2\n").is_err());
        let short = "uc2d-raster 1\ngrid 2 2\nbbox 0 1 0 1\nchannels d\n1\n2\n3\n";
        assert!(Raster::parse(short).is_err());
        let unknown = Raster::parse("uc2d-raster 1\ngrid 2 2\nbbox 0 1 0 1\nchannels zz\n1\n2\n3\n4\n").unwrap();
        assert!(unknown.to_coefficients("r", 4.0).is_err());
    }
}
