//! Reduced energy of vortex configurations and the search for its critical points.

use std::cell::{Cell, RefCell};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ansatz::{assemble_ansatz, scale_parameters, vortex_parameters, Admissibility, Vortex};
use crate::error::{Error, Result};
use crate::geometry::{BackgroundFields, DomainGrid, GreenCache, GreenSolver, Neighbor, Point};
use crate::profile::ProfileTable;

/// `½ ∫ |∇u|²/b` by face differences with harmonic averaging of `1/b`; `u` vanishes on the boundary.
pub fn dirichlet_energy(field: &[f64], fields: &BackgroundFields, grid: &DomainGrid) -> f64 {
    let faces = grid.face_coefficients(&fields.inv_depth());
    let mut total = 0.0;
    for (st, af) in grid.stencils.iter().zip(&faces) {
        let wp = field[st.node];
        for (arm, a) in st.arms.iter().zip(af) {
            // interior faces are visited from both ends
            let (wn, share) = match arm.neighbor {
                Neighbor::Unknown(u) => (field[grid.stencils[u].node], 0.5),
                Neighbor::Dirichlet { node: Some(k), .. } => (field[k], 1.0),
                Neighbor::Dirichlet { node: None, .. } => (0.0, 1.0),
            };
            let d = wp - wn;
            total += share * st.volume * arm.weight * a * d * d;
        }
    }
    0.5 * total
}

/// `(1/(p+1)) ∫ b (u−q)₊^{p+1}`, plus the `(−u−q)₊` well in pair mode.
pub fn potential_energy(field: &[f64], fields: &BackgroundFields, p: f64, grid: &DomainGrid, pair_mode: bool) -> f64 {
    let mut total = 0.0;
    for k in 0..grid.node_count() {
        let w = grid.quad_weights[k];
        if w == 0.0 {
            continue;
        }
        let u = field[k];
        let q = fields.q[k];
        let mut v = (u - q).max(0.0).powf(p + 1.0);
        if pair_mode {
            v += (-u - q).max(0.0).powf(p + 1.0);
        }
        total += w * fields.b[k] * v;
    }
    total / (p + 1.0)
}

/// Discrete `I(u)` (or `J(u)` in pair mode).
pub fn energy_quadrature(
    field: &[f64],
    fields: &BackgroundFields,
    delta: f64,
    p: f64,
    grid: &DomainGrid,
    pair_mode: bool,
) -> f64 {
    delta * delta * dirichlet_energy(field, fields, grid) - potential_energy(field, fields, p, grid, pair_mode)
}

/// `δ² ln|ln ε| / |ln ε|²`, the size of the expansion remainder.
pub fn expansion_scale(eps: f64, delta: f64) -> f64 {
    let l = -eps.ln();
    delta * delta * l.ln() / (l * l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Asymptotic reduced energy with its itemized terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub k_asymptotic: f64,
    pub i_quadrature: Option<f64>,
    /// `πδ² q²(z_j) / (b(z_j) ln(R/ε))`
    pub leading_terms: Vec<f64>,
    /// `g(z_j, z_j) / ln(R/ε)`
    pub robin_corrections: Vec<f64>,
    pub interaction_terms: Vec<InteractionTerm>,
    pub error_estimate: Option<f64>,
    pub vortices: Vec<Vortex>,
}

impl EnergyReport {
    pub fn from_vortices(vortices: Vec<Vortex>, eps: f64, delta: f64, green: &GreenCache) -> Self {
        let lam = (green.r_enclosing / eps).ln();
        let leading_terms: Vec<f64> =
            vortices.iter().map(|v| PI * delta * delta * v.q_center * v.q_center / (v.b_hat * lam)).collect();
        let robin_corrections: Vec<f64> = vortices.iter().map(|v| v.robin / lam).collect();
        let mut interaction_terms = Vec::new();
        for (i, vi) in vortices.iter().enumerate() {
            for (j, vj) in vortices.iter().enumerate() {
                if i == j {
                    continue;
                }
                // The leading terms use q(z_i); expanding q̂_i² through the strength system
                // contributes -2 of these per ordered pair against the +1 listed with q̂.
                let value = -vi.sign * vj.sign * PI * delta * delta * vi.q_hat * vj.q_hat * green.interaction[i][j]
                    / (vi.b_hat * vi.log_ratio * vj.log_ratio);
                interaction_terms.push(InteractionTerm { i, j, value });
            }
        }
        let mut report = Self {
            k_asymptotic: 0.0,
            i_quadrature: None,
            leading_terms,
            robin_corrections,
            interaction_terms,
            error_estimate: None,
            vortices,
        };
        report.k_asymptotic = report.sum_of_terms();
        report
    }

    pub fn sum_of_terms(&self) -> f64 {
        let own: f64 = self.leading_terms.iter().zip(&self.robin_corrections).map(|(l, r)| l * (1.0 + r)).sum();
        own + self.interaction_terms.iter().map(|t| t.value).sum::<f64>()
    }

    pub fn with_quadrature(mut self, i_quadrature: f64) -> Self {
        self.i_quadrature = Some(i_quadrature);
        self.error_estimate = Some((self.k_asymptotic - i_quadrature).abs());
        self
    }
}

/// Expansion of the reduced energy at `green.sources` (the first `n_plus` positive).
pub fn asymptotic_k(
    n_plus: usize,
    eps: f64,
    p: f64,
    green: &GreenCache,
    fields: &BackgroundFields,
    profile: &ProfileTable,
) -> Result<EnergyReport> {
    let (delta, _) = scale_parameters(eps, p)?;
    let (vortices, _) = vortex_parameters(n_plus, eps, p, green, fields, profile)?;
    Ok(EnergyReport::from_vortices(vortices, eps, delta, green))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionMode {
    Interior,
    Boundary,
}

/// Where the optimizer may place the vortices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRegion {
    pub mode: RegionMode,
    /// Initial centers (interior) or boundary points `ẑ` (boundary).
    pub anchors: Vec<Point>,
    pub n_plus: usize,
    /// Half-width of the box around each anchor in interior mode.
    pub radius: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub admissibility: Admissibility,
}

impl SearchRegion {
    pub fn interior(anchors: Vec<Point>, n_plus: usize, radius: f64, admissibility: Admissibility) -> Self {
        Self { mode: RegionMode::Interior, anchors, n_plus, radius, tau1: 4.0, tau2: 0.5, admissibility }
    }

    pub fn boundary(anchors: Vec<Point>, n_plus: usize, admissibility: Admissibility) -> Self {
        Self { mode: RegionMode::Boundary, anchors, n_plus, radius: admissibility.eta, tau1: 4.0, tau2: 0.5, admissibility }
    }

    /// Boundary-distance window `(|ln ε|^{−τ₁}, |ln ε|^{−τ₂})`, tightened by the admissible set.
    pub fn distance_window(&self, eps: f64) -> (f64, f64) {
        let l = -eps.ln();
        let lo = l.powf(-self.tau1).max(l.powf(-self.admissibility.alpha));
        (lo, l.powf(-self.tau2))
    }

    /// Signed slack to the region boundary; negative outside.
    pub fn slack(&self, grid: &DomainGrid, eps: f64, z: &[Point]) -> f64 {
        let shape = &grid.shape;
        let mut slack = f64::INFINITY;
        for (i, (&zi, a)) in z.iter().zip(&self.anchors).enumerate() {
            let d = shape.distance_to_boundary(zi);
            match self.mode {
                RegionMode::Interior => {
                    let box_gap = self.radius - (zi[0] - a[0]).abs().max((zi[1] - a[1]).abs());
                    slack = slack.min(box_gap).min(d - self.admissibility.rho);
                }
                RegionMode::Boundary => {
                    let (lo, hi) = self.distance_window(eps);
                    let off = (zi[0] - a[0]).hypot(zi[1] - a[1]);
                    slack = slack.min(d - lo).min(hi - d).min(self.admissibility.eta - off);
                }
            }
            let sep = self.admissibility.rho.powf(self.admissibility.l_bar);
            for zj in &z[i + 1..] {
                slack = slack.min((zi[0] - zj[0]).hypot(zi[1] - zj[1]) - sep);
            }
        }
        slack
    }

    /// Starting configuration.
    pub fn start(&self, grid: &DomainGrid, eps: f64) -> Vec<Point> {
        match self.mode {
            RegionMode::Interior => self.anchors.clone(),
            RegionMode::Boundary => {
                let (lo, hi) = self.distance_window(eps);
                self.anchors
                    .iter()
                    .map(|&a| {
                        let floor = lo.max(3.0 * grid.local_spacing(a));
                        let d = (floor * hi.min(self.admissibility.eta)).sqrt().max(floor);
                        let n = grid.shape.outward_normal(a);
                        [a[0] - d * n[0], a[1] - d * n[1]]
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Asymptotic,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    #[default]
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    pub initial_step: f64,
    pub xtol: f64,
    pub max_evaluations: usize,
    pub restarts: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { initial_step: 0.05, xtol: 1e-7, max_evaluations: 4000, restarts: 2 }
    }
}

/// Energy landscape over center configurations at a fixed ε.
pub struct EnergyLandscape<'a> {
    pub grid: &'a DomainGrid,
    pub fields: &'a BackgroundFields,
    pub profile: &'a ProfileTable,
    pub p: f64,
    pub eps: f64,
    solver: GreenSolver<'a>,
}

impl<'a> EnergyLandscape<'a> {
    pub fn new(grid: &'a DomainGrid, fields: &'a BackgroundFields, profile: &'a ProfileTable, p: f64, eps: f64) -> Result<Self> {
        Ok(Self { grid, fields, profile, p, eps, solver: GreenSolver::new(grid)? })
    }

    pub fn green(&self, centers: &[Point]) -> Result<GreenCache> {
        self.solver.cache(centers)
    }

    pub fn evaluate(&self, centers: &[Point], n_plus: usize, objective: Objective) -> Result<EnergyReport> {
        let green = self.green(centers)?;
        let report = asymptotic_k(n_plus, self.eps, self.p, &green, self.fields, self.profile)?;
        match objective {
            Objective::Asymptotic => Ok(report),
            Objective::Quadrature => {
                let ansatz = assemble_ansatz(n_plus, self.eps, self.p, self.grid, &green, self.fields, self.profile)?;
                let i = energy_quadrature(&ansatz.field, self.fields, ansatz.delta, self.p, self.grid, n_plus < centers.len());
                Ok(report.with_quadrature(i))
            }
        }
    }

    fn value(report: &EnergyReport, objective: Objective) -> f64 {
        match objective {
            Objective::Asymptotic => report.k_asymptotic,
            Objective::Quadrature => report.i_quadrature.unwrap_or(f64::NAN),
        }
    }
}

/// Located extremizer with its bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub centers: Vec<Point>,
    pub report: EnergyReport,
    pub evaluations: usize,
    pub slack: f64,
    pub trace: Vec<TracePoint>,
    /// Boundary mode: `−ln dist(z, ∂Ω) / ln|ln ε|` per vortex.
    pub alpha_hat: Vec<f64>,
    /// Boundary mode: `|z − ẑ| · |ln ε| / ln|ln ε|` per vortex.
    pub c_hat: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluation: usize,
    pub centers: Vec<Point>,
    pub value: f64,
}

pub fn optimize_centers(
    landscape: &EnergyLandscape<'_>,
    region: &SearchRegion,
    objective: Objective,
    extremum: Extremum,
    options: &OptimizerOptions,
) -> Result<OptimizeResult> {
    let eps = landscape.eps;
    let grid = landscape.grid;
    let sign = match extremum {
        Extremum::Min => 1.0,
        Extremum::Max => -1.0,
    };
    let unpack = |x: &[f64]| -> Vec<Point> { x.chunks(2).map(|c| [c[0], c[1]]).collect() };
    let evaluations = Cell::new(0usize);
    let trace = RefCell::new(Vec::new());
    let mut f = |x: &[f64]| -> f64 {
        let z = unpack(x);
        if region.slack(grid, eps, &z) < 0.0 {
            return f64::INFINITY;
        }
        evaluations.set(evaluations.get() + 1);
        match landscape.evaluate(&z, region.n_plus, objective) {
            Ok(r) => {
                let v = EnergyLandscape::value(&r, objective);
                trace.borrow_mut().push(TracePoint { evaluation: evaluations.get(), centers: z, value: v });
                sign * v
            }
            Err(_) => f64::INFINITY,
        }
    };

    let start = region.start(grid, eps);
    if region.slack(grid, eps, &start) < 0.0 {
        return Err(Error::Inadmissible("search region is empty at the starting configuration".into()));
    }
    let mut x: Vec<f64> = start.iter().flat_map(|z| [z[0], z[1]]).collect();
    let mut step = match region.mode {
        RegionMode::Interior => options.initial_step.min(0.5 * region.slack(grid, eps, &start)),
        RegionMode::Boundary => {
            let (lo, _) = region.distance_window(eps);
            let d = start.iter().map(|&z| grid.shape.distance_to_boundary(z)).fold(f64::INFINITY, f64::min);
            options.initial_step.min(0.5 * (d - lo).max(1e-6))
        }
    };
    let mut best = f64::INFINITY;
    for _ in 0..=options.restarts {
        let budget = options.max_evaluations.saturating_sub(evaluations.get()).max(1);
        let (xn, fx) = nelder_mead(&mut f, &x, step, options.xtol, budget);
        let improved = fx < best - 1e-15 * fx.abs();
        x = xn;
        best = best.min(fx);
        if !improved {
            break;
        }
        step = (step * 0.1).max(10.0 * options.xtol);
    }
    if !best.is_finite() {
        return Err(Error::Inadmissible("no admissible configuration could be evaluated".into()));
    }
    let centers = unpack(&x);
    let report = landscape.evaluate(&centers, region.n_plus, objective)?;
    let slack = region.slack(grid, eps, &centers);
    if slack < 1e-3 * step.max(options.xtol) + 10.0 * options.xtol {
        let z = centers[0];
        return Err(Error::ExtremumOnRegionBoundary { x: z[0], y: z[1] });
    }
    let l = -eps.ln();
    let (alpha_hat, c_hat) = match region.mode {
        RegionMode::Interior => (Vec::new(), Vec::new()),
        RegionMode::Boundary => centers
            .iter()
            .zip(&region.anchors)
            .map(|(&z, a)| {
                let d = grid.shape.distance_to_boundary(z);
                let off = (z[0] - a[0]).hypot(z[1] - a[1]);
                (-d.ln() / l.ln(), off * l / l.ln())
            })
            .unzip(),
    };
    Ok(OptimizeResult {
        centers,
        report,
        evaluations: evaluations.get(),
        slack,
        trace: trace.into_inner(),
        alpha_hat,
        c_hat,
    })
}

/// Nelder–Mead simplex search; returns the best vertex and its value.
pub fn nelder_mead(f: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64], step: f64, xtol: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    // Try the opposite direction for infeasible initial vertices.
    for i in 0..n {
        if !values[i + 1].is_finite() {
            let mut v = x0.to_vec();
            v[i] -= step;
            let fv = f(&v);
            evals += 1;
            if fv.is_finite() {
                simplex[i + 1] = v;
                values[i + 1] = fv;
            }
        }
    }
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let size = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size <= xtol {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64).collect();
        let towards = |t: f64| -> Vec<f64> { (0..n).map(|d| centroid[d] + t * (simplex[n][d] - centroid[d])).collect() };
        let xr = towards(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = towards(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = towards(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = towards(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let v: Vec<f64> = (0..n).map(|d| simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d])).collect();
                    values[i] = f(&v);
                    simplex[i] = v;
                    evals += 1;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    (simplex[best].clone(), values[best])
}

/// `K` (and optionally `I`) over a rectangular scan of single-vortex positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeSample {
    pub x: f64,
    pub y: f64,
    pub k: f64,
}

pub fn scan_landscape(landscape: &EnergyLandscape<'_>, points: &[Point]) -> Vec<LandscapeSample> {
    points
        .iter()
        .filter_map(|&z| {
            landscape
                .evaluate(&[z], 1, Objective::Asymptotic)
                .ok()
                .map(|r| LandscapeSample { x: z[0], y: z[1], k: r.k_asymptotic })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, compute_green, Background, Bump, Depth, Shape};
    use crate::profile::solve_profile;

    #[test]
    fn zero_field_has_zero_energy() {
        let g = build_grid(Shape::unit_disk(), 1.0 / 32.0).unwrap();
        let f = BackgroundFields::new(Background::uniform(1.0, 1.0), &g).unwrap();
        let zero = vec![0.0; g.node_count()];
        assert_eq!(energy_quadrature(&zero, &f, 0.1, 2.0, &g, false), 0.0);
    }

    #[test]
    fn doubling_delta_quadruples_gradient_term() {
        let g = build_grid(Shape::unit_disk(), 1.0 / 32.0).unwrap();
        let f = BackgroundFields::new(Background::uniform(1.0, 0.5), &g).unwrap();
        let u: Vec<f64> = g.points().map(|p| (1.0 - p[0] * p[0] - p[1] * p[1]).max(0.0)).collect();
        let pot = potential_energy(&u, &f, 2.0, &g, false);
        let i1 = energy_quadrature(&u, &f, 0.1, 2.0, &g, false) + pot;
        let i2 = energy_quadrature(&u, &f, 0.2, 2.0, &g, false) + pot;
        assert!((i2 - 4.0 * i1).abs() <= 1e-14 * i2.abs());
    }

    #[test]
    fn dirichlet_energy_of_a_paraboloid() {
        // u = 1 − r² on the unit disk: ½∫|∇u|² = π
        let g = build_grid(Shape::unit_disk(), 1.0 / 128.0).unwrap();
        let f = BackgroundFields::new(Background::uniform(1.0, 1.0), &g).unwrap();
        let u: Vec<f64> = (0..g.node_count())
            .map(|k| if g.unknown_of(k).is_some() { let p = g.point(k); 1.0 - p[0] * p[0] - p[1] * p[1] } else { 0.0 })
            .collect();
        let e = dirichlet_energy(&u, &f, &g);
        assert!((e - PI).abs() < 0.01 * PI, "{e}");
    }

    #[test]
    fn centred_vortex_expansion_terms() {
        let g = build_grid(Shape::unit_disk(), 1.0 / 32.0).unwrap();
        let f = BackgroundFields::new(Background::uniform(1.0, 1.0), &g).unwrap();
        let profile = solve_profile(2.0, 1000).unwrap();
        let eps = (-6.0f64).exp();
        let green = compute_green(&g, &[[0.0, 0.0]]).unwrap();
        let r = asymptotic_k(1, eps, 2.0, &green, &f, &profile).unwrap();
        let (delta, _) = scale_parameters(eps, 2.0).unwrap();
        let lam = (4.0 / eps).ln();
        assert!((r.leading_terms[0] - PI * delta * delta / lam).abs() < 1e-15);
        assert!((r.robin_corrections[0] - 4f64.ln() / lam).abs() < 1e-3 / lam);
        assert_eq!(r.k_asymptotic, r.sum_of_terms());
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.1).powi(2);
        let (x, v) = nelder_mead(&mut f, &[0.0, 0.0], 0.1, 1e-9, 2000);
        assert!((x[0] - 0.3).abs() < 1e-8 && (x[1] + 0.1).abs() < 1e-8 && v < 1e-15);
    }

    #[test]
    fn optimizer_moves_toward_depth_maximum() {
        let g = build_grid(Shape::unit_disk(), 1.0 / 32.0).unwrap();
        let depth = Depth::Bumps { base: 1.0, bumps: vec![Bump { center: [0.2, 0.1], amplitude: 1.0, width: 0.2 }] };
        let f = BackgroundFields::new(Background::ConstantStream { stream: 1.0, depth }, &g).unwrap();
        let profile = solve_profile(2.0, 1000).unwrap();
        let land = EnergyLandscape::new(&g, &f, &profile, 2.0, (-6.0f64).exp()).unwrap();
        let region = SearchRegion::interior(vec![[0.1, 0.0]], 1, 0.3, Admissibility::for_shape(&g.shape));
        let res = optimize_centers(&land, &region, Objective::Asymptotic, Extremum::Min, &OptimizerOptions::default()).unwrap();
        let z = res.centers[0];
        assert!((z[0] - 0.2).hypot(z[1] - 0.1) < 0.02, "{z:?}");
    }
}
