//! Declarative experiment description read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ansatz::Admissibility;
use crate::energy::{Extremum, Objective, OptimizerOptions};
use crate::error::{Error, Result};
use crate::geometry::{build_grid_with, check_background, Background, BackgroundFields, DomainGrid, Point, Shape};
use crate::solver::{GridPolicy, NewtonOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Interior,
    Boundary,
    Pair,
}

/// Explicit centers or `{ auto = m }` to take the `m` best extrema of `q²/b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Centers {
    Points(Vec<Point>),
    Auto { auto: usize },
}

impl Default for Centers {
    fn default() -> Self {
        Centers::Points(Vec::new())
    }
}

impl Centers {
    pub fn count(&self) -> usize {
        match self {
            Centers::Points(v) => v.len(),
            Centers::Auto { auto } => *auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexPlan {
    pub plus: Centers,
    #[serde(default)]
    pub minus: Centers,
    /// Predicted limit points for the trend table; defaults to the initial centers.
    #[serde(default)]
    pub targets: Option<Vec<Point>>,
    /// Locate centers at each rung by extremizing the reduced energy.
    #[serde(default = "yes")]
    pub optimize: bool,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub extremum: Extremum,
    #[serde(default = "default_search_radius")]
    pub search_radius: f64,
}

fn yes() -> bool {
    true
}

fn default_search_radius() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    /// `ε = e^{−k}` for each listed `k`.
    #[serde(default)]
    pub exponents: Option<Vec<f64>>,
}

impl LadderSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match (&self.eps, &self.exponents) {
            (Some(e), None) => Ok(e.clone()),
            (None, Some(k)) => Ok(k.iter().map(|k| (-k).exp()).collect()),
            _ => Err(Error::Validation("ladder needs exactly one of `eps` or `exponents`".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualPolicy {
    #[default]
    Require,
    Warn,
}

/// Policy for the compatibility condition `div(∇q/b) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationPolicy {
    pub residual: ResidualPolicy,
    /// Bound on `sup|div_h(∇q/b)| · h²_min / (sup q · sup 1/b)`.
    pub residual_tol: f64,
}

impl Default for ValidationPolicy {
    fn default() -> Self {
        Self { residual: ResidualPolicy::Require, residual_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldDump {
    None,
    #[default]
    Last,
    All,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub fields: FieldDump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub p: f64,
    #[serde(default)]
    pub mode: Mode,
    pub domain: Shape,
    pub grid: GridPolicy,
    pub background: Background,
    #[serde(default)]
    pub validation: ValidationPolicy,
    pub vortices: VortexPlan,
    pub ladder: LadderSpec,
    #[serde(default)]
    pub solver: NewtonOptions,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
    #[serde(default)]
    pub admissibility: Option<Admissibility>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory used to resolve relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// Loaded table for a `csv` background.
    #[serde(skip)]
    pub loaded: Option<Background>,
}

impl Scenario {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.base_dir = base_dir.to_path_buf();
        if matches!(s.background, Background::Csv { .. }) {
            s.loaded = Some(s.background.clone().resolve(base_dir)?);
        }
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Background with any table loaded.
    pub fn background(&self) -> &Background {
        self.loaded.as_ref().unwrap_or(&self.background)
    }

    pub fn admissibility(&self) -> Admissibility {
        self.admissibility.unwrap_or_else(|| Admissibility::for_shape(&self.domain))
    }

    pub fn eps_ladder(&self) -> Result<Vec<f64>> {
        self.ladder.values()
    }

    /// The uniform grid at the base spacing, with the scenario's fixed refinements.
    pub fn base_grid(&self) -> Result<DomainGrid> {
        let spec = crate::geometry::GridSpec {
            spacing: self.grid.spacing,
            refinements: self.grid.extra.clone(),
            grading: self.grid.grading,
        };
        build_grid_with(self.domain, &spec)
    }

    pub fn explicit_plus(&self) -> Option<&[Point]> {
        match &self.vortices.plus {
            Centers::Points(v) => Some(v),
            Centers::Auto { .. } => None,
        }
    }

    pub fn explicit_minus(&self) -> Vec<Point> {
        match &self.vortices.minus {
            Centers::Points(v) => v.clone(),
            Centers::Auto { .. } => Vec::new(),
        }
    }

    /// Hypothesis and consistency checks; returns warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("p = {} must exceed 1", self.p));
        }
        match self.domain {
            Shape::Disk { radius, .. } if !(radius > 0.0) => return bad("disk radius must be positive".into()),
            Shape::Rectangle { min, max } if !(max[0] > min[0] && max[1] > min[1]) => {
                return bad("rectangle needs max > min".into())
            }
            _ => {}
        }
        if !(self.grid.spacing > 0.0) {
            return bad("grid spacing must be positive".into());
        }
        let eps = self.eps_ladder()?;
        if eps.is_empty() {
            return bad("eps ladder is empty".into());
        }
        if eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad("every eps must lie in (0, 1)".into());
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps ladder must be strictly descending".into());
        }
        let n_plus = self.vortices.plus.count();
        let n_minus = self.vortices.minus.count();
        if n_plus == 0 {
            return bad("at least one positive vortex is required".into());
        }
        if matches!(self.vortices.minus, Centers::Auto { .. }) {
            return bad("negative centers must be listed explicitly".into());
        }
        if self.mode != Mode::Pair && n_minus > 0 {
            return bad(format!("mode {:?} does not allow negative vortices", self.mode));
        }
        if let Some(t) = &self.vortices.targets {
            if t.len() != n_plus + n_minus {
                return bad(format!("{} targets for {} vortices", t.len(), n_plus + n_minus));
            }
        }

        let grid = self.base_grid()?;
        let fields = BackgroundFields::new(self.background().clone(), &grid)?;
        let residual = normalized_background_residual(&fields, &grid);
        if residual > self.validation.residual_tol {
            let msg = format!(
                "background violates div(grad q / b) = 0: normalized residual {residual:.3e} > {:.1e}",
                self.validation.residual_tol
            );
            match self.validation.residual {
                ResidualPolicy::Require => return bad(msg),
                ResidualPolicy::Warn => warnings.push(msg),
            }
        }

        let mut centers: Vec<Point> = self.explicit_plus().map(<[Point]>::to_vec).unwrap_or_default();
        centers.extend(self.explicit_minus());
        match self.mode {
            Mode::Interior | Mode::Pair => {
                for z in &centers {
                    if !self.domain.contains(*z) {
                        return bad(format!("center ({}, {}) is outside the domain", z[0], z[1]));
                    }
                }
            }
            Mode::Boundary => {
                let tol = 1e-9 * self.domain.diameter();
                for &z in &centers {
                    if self.domain.distance_to_boundary(z).abs() > tol {
                        return bad(format!("boundary anchor ({}, {}) is not on the boundary", z[0], z[1]));
                    }
                    check_boundary_minimum(self.background(), &self.domain, z, self.grid.spacing)?;
                }
            }
        }
        Ok(warnings)
    }
}

/// Discrete compatibility residual, scaled so that a smooth incompatible background gives `O(h²)`.
pub fn normalized_background_residual(fields: &BackgroundFields, grid: &DomainGrid) -> f64 {
    let r = check_background(fields, grid);
    let mut q_sup = 0.0f64;
    let mut inv_b_sup = 0.0f64;
    for st in &grid.stencils {
        q_sup = q_sup.max(fields.q[st.node].abs());
        inv_b_sup = inv_b_sup.max(1.0 / fields.b[st.node]);
    }
    let h = grid.min_spacing();
    r * h * h / (q_sup * inv_b_sup)
}

/// `q²/b` restricted to the boundary must be strictly larger at nearby boundary points.
pub fn check_boundary_minimum(background: &Background, shape: &Shape, z: Point, spacing: f64) -> Result<()> {
    let f0 = background.ratio(z);
    let t = shape.outward_normal(z);
    let tangent = [-t[1], t[0]];
    for k in 0..4 {
        let d = spacing * 0.5f64.powi(k);
        for s in [-1.0, 1.0] {
            let y = shape.project_to_boundary([z[0] + s * d * tangent[0], z[1] + s * d * tangent[1]]);
            let f = background.ratio(y);
            if !(f > f0) {
                return Err(Error::Validation(format!(
                    "anchor ({:.4}, {:.4}) is not a strict minimum of q^2/b along the boundary ({f:.6e} <= {f0:.6e} at offset {:.2e})",
                    z[0],
                    z[1],
                    s * d
                )));
            }
        }
    }
    Ok(())
}
