use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{DomainGrid, NodeKind};
use super::shape::Point;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Point,
    pub amplitude: f64,
    pub width: f64,
}

/// Depth profiles for the constant-stream family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Depth {
    Constant { value: f64 },
    /// `base + Σ A·exp(−|x−c|²/(2σ²))`
    Bumps { base: f64, bumps: Vec<Bump> },
    /// `base·exp(g·x)`
    Exponential { base: f64, gradient: Point },
}

impl Depth {
    pub fn eval(&self, p: Point) -> f64 {
        match self {
            Depth::Constant { value } => *value,
            Depth::Bumps { base, bumps } => bumps.iter().fold(*base, |acc, b| {
                let dx = p[0] - b.center[0];
                let dy = p[1] - b.center[1];
                acc + b.amplitude * (-(dx * dx + dy * dy) / (2.0 * b.width * b.width)).exp()
            }),
            Depth::Exponential { base, gradient } => base * (gradient[0] * p[0] + gradient[1] * p[1]).exp(),
        }
    }
}

/// Depth `b` and rescaled background stream `q = −ψ₀`. Every built-in family satisfies `div(∇q/b) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Background {
    /// Constant depth with harmonic stream `q₀ + g·x + a(x² − y²) + 2c xy`, `quadratic = [a, c]`.
    ConstantDepth {
        depth: f64,
        stream: f64,
        #[serde(default)]
        gradient: Point,
        #[serde(default)]
        quadratic: [f64; 2],
    },
    /// Arbitrary positive depth with constant stream.
    ConstantStream { stream: f64, depth: Depth },
    /// `b = b₀ r^β`, `q = q₀ + κ b₀ r^β / β` in polar coordinates about `origin`,
    /// so that `r q′(r) / b(r) = κ`. With `β = 0`, `q = q₀ + κ b₀ ln r`.
    RadialPair {
        origin: Point,
        depth_scale: f64,
        exponent: f64,
        stream: f64,
        flux: f64,
    },
    /// Tabulated fields; resolved from `Csv` by [`Background::resolve`].
    #[serde(skip)]
    Table(Arc<SampledTable>),
    Csv { path: String },
}

impl Background {
    pub fn uniform(depth: f64, stream: f64) -> Self {
        Background::ConstantDepth { depth, stream, gradient: [0.0, 0.0], quadratic: [0.0, 0.0] }
    }

    pub fn depth(&self, p: Point) -> f64 {
        match self {
            Background::ConstantDepth { depth, .. } => *depth,
            Background::ConstantStream { depth, .. } => depth.eval(p),
            Background::RadialPair { origin, depth_scale, exponent, .. } => {
                let r = (p[0] - origin[0]).hypot(p[1] - origin[1]);
                depth_scale * r.powf(*exponent)
            }
            Background::Table(t) => t.interpolate(&t.b, p),
            Background::Csv { .. } => f64::NAN,
        }
    }

    pub fn stream(&self, p: Point) -> f64 {
        match self {
            Background::ConstantDepth { stream, gradient, quadratic, .. } => {
                let [a, c] = *quadratic;
                stream + gradient[0] * p[0] + gradient[1] * p[1] + a * (p[0] * p[0] - p[1] * p[1]) + 2.0 * c * p[0] * p[1]
            }
            Background::ConstantStream { stream, .. } => *stream,
            Background::RadialPair { origin, depth_scale, exponent, stream, flux } => {
                let r = (p[0] - origin[0]).hypot(p[1] - origin[1]);
                if *exponent == 0.0 {
                    stream + flux * depth_scale * r.ln()
                } else {
                    stream + flux * depth_scale * r.powf(*exponent) / exponent
                }
            }
            Background::Table(t) => t.interpolate(&t.q, p),
            Background::Csv { .. } => f64::NAN,
        }
    }

    /// `q²/b`, the function whose extrema locate vortices.
    pub fn ratio(&self, p: Point) -> f64 {
        let q = self.stream(p);
        q * q / self.depth(p)
    }

    /// Load tabulated data; relative paths are taken from `base`.
    pub fn resolve(self, base: &Path) -> Result<Self> {
        match self {
            Background::Csv { path } => {
                let full = base.join(&path);
                let table = SampledTable::from_csv(&full)?;
                Ok(Background::Table(Arc::new(table)))
            }
            other => Ok(other),
        }
    }
}

/// Fields on a tensor-product sample grid, read from CSV with columns `x, y, b, q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTable {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub b: Vec<f64>,
    pub q: Vec<f64>,
}

impl SampledTable {
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for rec in reader.deserialize::<(f64, f64, f64, f64)>() {
            let (x, y, b, q) = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            rows.push([x, y, b, q]);
        }
        Self::from_rows(&rows)
    }

    pub fn from_rows(rows: &[[f64; 4]]) -> Result<Self> {
        let axis = |c: usize| {
            let mut v: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let xs = axis(0);
        let ys = axis(1);
        if xs.len() < 2 || ys.len() < 2 || xs.len() * ys.len() != rows.len() {
            return Err(Error::Parse(format!(
                "background table is not a full tensor grid ({} x {} axes, {} rows)",
                xs.len(),
                ys.len(),
                rows.len()
            )));
        }
        let mut b = vec![f64::NAN; rows.len()];
        let mut q = vec![f64::NAN; rows.len()];
        for r in rows {
            let i = xs.partition_point(|&t| t < r[0]);
            let j = ys.partition_point(|&t| t < r[1]);
            b[j * xs.len() + i] = r[2];
            q[j * xs.len() + i] = r[3];
        }
        Ok(Self { xs, ys, b, q })
    }

    fn interpolate(&self, f: &[f64], p: Point) -> f64 {
        let cell = |v: &[f64], x: f64| v.partition_point(|&t| t <= x).saturating_sub(1).min(v.len() - 2);
        let i = cell(&self.xs, p[0]);
        let j = cell(&self.ys, p[1]);
        let tx = ((p[0] - self.xs[i]) / (self.xs[i + 1] - self.xs[i])).clamp(0.0, 1.0);
        let ty = ((p[1] - self.ys[j]) / (self.ys[j + 1] - self.ys[j])).clamp(0.0, 1.0);
        let n = self.xs.len();
        let k = j * n + i;
        (1.0 - ty) * ((1.0 - tx) * f[k] + tx * f[k + 1]) + ty * ((1.0 - tx) * f[k + n] + tx * f[k + n + 1])
    }
}

/// Background sampled at the grid nodes.
#[derive(Debug, Clone)]
pub struct BackgroundFields {
    pub background: Background,
    pub b: Vec<f64>,
    pub q: Vec<f64>,
    pub psi0: Vec<f64>,
    pub ratio: Vec<f64>,
}

impl BackgroundFields {
    /// Sample on the grid and validate positivity of `b` and `q` over the closed domain.
    pub fn new(background: Background, grid: &DomainGrid) -> Result<Self> {
        if let Background::Csv { path } = &background {
            return Err(Error::Validation(format!("background table {path} was not loaded")));
        }
        let b: Vec<f64> = grid.points().map(|p| background.depth(p)).collect();
        let q: Vec<f64> = grid.points().map(|p| background.stream(p)).collect();
        for k in 0..grid.node_count() {
            if grid.kinds[k] == NodeKind::Exterior {
                continue;
            }
            let p = grid.point(k);
            if !(b[k] > 0.0) || !b[k].is_finite() {
                return Err(Error::Validation(format!("depth b = {} at ({:.4}, {:.4})", b[k], p[0], p[1])));
            }
            if !(q[k] > 0.0) || !q[k].is_finite() {
                return Err(Error::Validation(format!("stream q = {} at ({:.4}, {:.4})", q[k], p[0], p[1])));
            }
        }
        let psi0 = q.iter().map(|v| -v).collect();
        let ratio = q.iter().zip(&b).map(|(q, b)| q * q / b).collect();
        Ok(Self { background, b, q, psi0, ratio })
    }

    pub fn depth_at(&self, p: Point) -> f64 {
        self.background.depth(p)
    }

    pub fn stream_at(&self, p: Point) -> f64 {
        self.background.stream(p)
    }

    pub fn inv_depth(&self) -> Vec<f64> {
        self.b.iter().map(|b| 1.0 / b).collect()
    }
}

/// Sup-norm of the discrete `div(∇q/b)` over interior nodes.
pub fn check_background(fields: &BackgroundFields, grid: &DomainGrid) -> f64 {
    let faces = grid.face_coefficients(&fields.inv_depth());
    let bg = &fields.background;
    let r = grid.apply_diffusion(&faces, &fields.q, &|p| bg.stream(p));
    r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, Shape};

    #[test]
    fn affine_stream_with_constant_depth_is_compatible() {
        let g = build_grid(Shape::unit_square(), 1.0 / 32.0).unwrap();
        let bg = Background::ConstantDepth { depth: 1.0, stream: 2.0, gradient: [0.25, -0.125], quadratic: [0.0, 0.0] };
        let f = BackgroundFields::new(bg, &g).unwrap();
        let r = check_background(&f, &g);
        assert!(r <= 1e-12, "{r}");
    }

    #[test]
    fn harmonic_quadratic_stream_is_compatible() {
        let g = build_grid(Shape::unit_square(), 1.0 / 32.0).unwrap();
        let bg = Background::ConstantDepth { depth: 1.0, stream: 2.0, gradient: [0.0, 0.0], quadratic: [0.25, 0.125] };
        let f = BackgroundFields::new(bg, &g).unwrap();
        assert!(check_background(&f, &g) <= 1e-10);
    }

    #[test]
    fn constant_stream_gives_zero_residual() {
        let g = build_grid(Shape::unit_disk(), 1.0 / 32.0).unwrap();
        let depth = Depth::Bumps { base: 1.0, bumps: vec![Bump { center: [0.1, 0.0], amplitude: 1.0, width: 0.2 }] };
        let f = BackgroundFields::new(Background::ConstantStream { stream: 1.0, depth }, &g).unwrap();
        assert_eq!(check_background(&f, &g), 0.0);
        for k in 0..g.node_count() {
            assert_eq!(f.ratio[k], f.q[k] * f.q[k] / f.b[k]);
        }
    }

    #[test]
    fn radial_pair_residual_shrinks_under_refinement() {
        let bg = Background::RadialPair { origin: [-3.0, 0.0], depth_scale: 0.5, exponent: 1.0, stream: 1.0, flux: 0.4 };
        let res: Vec<f64> = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
            .iter()
            .map(|&h| {
                let g = build_grid(Shape::unit_square(), h).unwrap();
                check_background(&BackgroundFields::new(bg.clone(), &g).unwrap(), &g)
            })
            .collect();
        assert!(res[1] < 0.4 * res[0] && res[2] < 0.4 * res[1], "{res:?}");
    }

    #[test]
    fn nonpositive_stream_is_rejected() {
        let g = build_grid(Shape::unit_square(), 1.0 / 32.0).unwrap();
        let bg = Background::ConstantDepth { depth: 1.0, stream: 0.5, gradient: [-1.0, 0.0], quadratic: [0.0, 0.0] };
        assert!(matches!(BackgroundFields::new(bg, &g), Err(Error::Validation(_))));
    }

    #[test]
    fn table_round_trip() {
        let mut rows = Vec::new();
        for j in 0..3 {
            for i in 0..4 {
                let (x, y) = (i as f64, j as f64);
                rows.push([x, y, 1.0 + x, 2.0 + y]);
            }
        }
        let t = SampledTable::from_rows(&rows).unwrap();
        let bg = Background::Table(Arc::new(t));
        assert!((bg.depth([1.5, 0.7]) - 2.5).abs() < 1e-14);
        assert!((bg.stream([1.5, 0.7]) - 2.7).abs() < 1e-14);
    }
}
