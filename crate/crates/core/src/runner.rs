//! Scenario pipeline: extrema, center location, ε ladder, diagnostics and artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    circulation, extract_cores, reconstruct_flow, trend_row, write_field_csv, write_flow_csv, Circulation,
    TrendTable, VortexCoreReport, CURL_CONVENTION,
};
use crate::energy::{nelder_mead, optimize_centers, EnergyLandscape, Extremum, Objective, OptimizeResult, SearchRegion};
use crate::error::{Error, Result};
use crate::geometry::{build_grid_with, Background, BackgroundFields, DomainGrid, GridSpec, NodeKind, Point, Refinement, Shape};
use crate::profile::{solve_profile, ProfileTable};
use crate::scenario::{Centers, FieldDump, Mode, Scenario};
use crate::solver::{Problem, Projection, Rung};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_INVARIANT: i32 = 5;

/// Samples per unit radius used for the profile table.
pub const PROFILE_GRID: usize = 4000;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Json(_) => EXIT_PARSE,
        Error::Diverged { .. } | Error::FellToTrivial { .. } | Error::NoConvergence(..) | Error::LinearSolve(_) => {
            EXIT_DIVERGENCE
        }
        Error::Invariant(_) | Error::EmptyCore => EXIT_INVARIANT,
        Error::Io(_) | Error::Csv(_) => EXIT_FAILURE,
        _ => EXIT_VALIDATION,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Interior,
    Boundary,
}

/// Strict local extremum of `q²/b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: Point,
    pub kind: Extremum,
    pub location: Location,
    pub value: f64,
    /// Smallest curvature magnitude relative to the value, in units of `1/diam²`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtremaReport {
    pub candidates: Vec<Candidate>,
    pub warnings: Vec<String>,
}

impl ExtremaReport {
    pub fn of(&self, kind: Extremum, location: Location) -> Vec<Candidate> {
        let mut v: Vec<Candidate> =
            self.candidates.iter().copied().filter(|c| c.kind == kind && c.location == location).collect();
        match kind {
            Extremum::Min => v.sort_by(|a, b| a.value.total_cmp(&b.value)),
            Extremum::Max => v.sort_by(|a, b| b.value.total_cmp(&a.value)),
        }
        v
    }
}

const MIN_MARGIN: f64 = 1e-6;

/// Grid scan of `q²/b` followed by local refinement and a finite-difference Hessian check.
pub fn list_extrema(background: &Background, grid: &DomainGrid) -> ExtremaReport {
    let shape = grid.shape;
    let diam = shape.diameter();
    let ratio = |p: Point| background.ratio(p);
    let nx = grid.nx();
    let ny = grid.ny();
    let values: Vec<f64> = grid.points().map(ratio).collect();
    let mut candidates: Vec<Candidate> = Vec::new();

    for j in 1..ny.saturating_sub(1) {
        for i in 1..nx.saturating_sub(1) {
            let k = j * nx + i;
            if grid.kinds[k] != NodeKind::Interior {
                continue;
            }
            let mut lower = true;
            let mut upper = true;
            let mut inside = true;
            for dj in [-1isize, 0, 1] {
                for di in [-1isize, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let kk = ((j as isize + dj) as usize) * nx + (i as isize + di) as usize;
                    inside &= grid.kinds[kk] == NodeKind::Interior;
                    lower &= values[k] < values[kk];
                    upper &= values[k] > values[kk];
                }
            }
            if !inside || !(lower || upper) {
                continue;
            }
            let kind = if lower { Extremum::Min } else { Extremum::Max };
            let s = if lower { 1.0 } else { -1.0 };
            let mut f = |x: &[f64]| {
                let p = [x[0], x[1]];
                if shape.distance_to_boundary(p) > 0.0 {
                    s * ratio(p)
                } else {
                    f64::INFINITY
                }
            };
            let (x, _) = nelder_mead(&mut f, &grid.point(k), grid.local_spacing(grid.point(k)), 1e-12 * diam, 2000);
            let z = [x[0], x[1]];
            let value = ratio(z);
            let eta = 1e-3 * diam;
            let h = hessian(&ratio, z, eta);
            let tr = h[0] + h[2];
            let det = h[0] * h[2] - h[1] * h[1];
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            let (l1, l2) = (0.5 * tr - disc, 0.5 * tr + disc);
            let margin = l1.abs().min(l2.abs()) * diam * diam / value.abs().max(f64::MIN_POSITIVE);
            let definite = match kind {
                Extremum::Min => l1 > 0.0,
                Extremum::Max => l2 < 0.0,
            };
            if !definite || margin < MIN_MARGIN {
                continue;
            }
            if candidates.iter().any(|c| (c.point[0] - z[0]).hypot(c.point[1] - z[1]) < grid.spacing()) {
                continue;
            }
            candidates.push(Candidate { point: z, kind, location: Location::Interior, value, margin });
        }
    }

    let step = grid.spacing() / 4.0;
    let trace = shape.boundary_trace(step);
    let n = trace.len();
    let tv: Vec<f64> = trace.iter().map(|&p| ratio(p)).collect();
    for i in 0..n {
        let (a, b) = ((i + n - 1) % n, (i + 1) % n);
        let lower = tv[i] < tv[a] && tv[i] < tv[b];
        let upper = tv[i] > tv[a] && tv[i] > tv[b];
        if !(lower || upper) {
            continue;
        }
        let kind = if lower { Extremum::Min } else { Extremum::Max };
        let s = if lower { 1.0 } else { -1.0 };
        let (pa, pb) = (trace[a], trace[b]);
        let along = |t: f64| shape.project_to_boundary([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
        let t = golden_section(|t| s * ratio(along(t)), 0.0, 1.0, 80);
        let z = along(t);
        let value = ratio(z);
        let d = 0.5 * (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
        let second = (tv[a] + tv[b] - 2.0 * tv[i]) / (d * d);
        let margin = second.abs() * diam * diam / value.abs().max(f64::MIN_POSITIVE);
        if margin < MIN_MARGIN {
            continue;
        }
        candidates.push(Candidate { point: z, kind, location: Location::Boundary, value, margin });
    }

    let mut warnings = Vec::new();
    if candidates.is_empty() {
        warnings.push("q^2/b has no strict local extrema on this grid".to_string());
    }
    ExtremaReport { candidates, warnings }
}

/// Central-difference Hessian `[f_xx, f_xy, f_yy]`.
fn hessian(f: &dyn Fn(Point) -> f64, z: Point, h: f64) -> [f64; 3] {
    let at = |dx: f64, dy: f64| f([z[0] + dx, z[1] + dy]);
    let f0 = at(0.0, 0.0);
    let fxx = (at(h, 0.0) - 2.0 * f0 + at(-h, 0.0)) / (h * h);
    let fyy = (at(0.0, h) - 2.0 * f0 + at(0.0, -h)) / (h * h);
    let fxy = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
    [fxx, fxy, fyy]
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iterations: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iterations {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub eps_ladder: Option<Vec<f64>>,
    pub strict: bool,
}

/// Center-location result at one rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerRecord {
    pub start: Vec<Point>,
    pub centers: Vec<Point>,
    pub k_asymptotic: f64,
    pub i_quadrature: Option<f64>,
    pub evaluations: usize,
    pub slack: f64,
    pub alpha_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
}

/// Everything reported about one solved rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungRecord {
    pub index: usize,
    pub eps: f64,
    pub delta: f64,
    pub nodes: usize,
    pub unknowns: usize,
    pub min_spacing: f64,
    pub centers: Vec<Point>,
    pub signs: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub core_radii: Vec<f64>,
    pub l_mult: f64,
    pub positivity_margin: f64,
    pub dominance_margin: f64,
    pub warm_started: bool,
    pub newton_iterations: usize,
    pub residual_sup: f64,
    pub residual_relative: f64,
    pub residual_p: f64,
    pub correction_sup: f64,
    pub optimizer: Option<OptimizerRecord>,
    /// Present when the centers were moved by the projected solve.
    pub projection: Option<Projection>,
    pub cores: Option<VortexCoreReport>,
    pub circulation: Circulation,
    pub divergence_relative: f64,
    pub stationarity_relative: f64,
    pub stationarity_nodes: usize,
    pub flux_error: f64,
    pub boundary_sup: f64,
}

/// In-memory result of a scenario run.
#[derive(Debug)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub eps: Vec<f64>,
    pub profile: ProfileTable,
    pub extrema: ExtremaReport,
    pub initial_plus: Vec<Point>,
    pub initial_minus: Vec<Point>,
    pub targets: Vec<Point>,
    pub rungs: Vec<Rung>,
    pub optimizations: Vec<Option<OptimizeResult>>,
    pub records: Vec<RungRecord>,
    pub trend: TrendTable,
    pub warnings: Vec<String>,
    pub invariant_failures: Vec<String>,
    pub failure: Option<(f64, Error)>,
    pub strict: bool,
}

impl ScenarioRun {
    pub fn exit_code(&self) -> i32 {
        if let Some((_, e)) = &self.failure {
            return exit_code(e);
        }
        if !self.invariant_failures.is_empty() || (self.strict && !self.warnings.is_empty()) {
            return EXIT_INVARIANT;
        }
        EXIT_OK
    }

    pub fn n_plus(&self) -> usize {
        self.initial_plus.len()
    }
}

/// Validate, pick centers and targets, solve the ladder and compute diagnostics. Writes nothing.
pub fn execute(scenario: &Scenario, options: &RunOptions) -> Result<ScenarioRun> {
    let mut warnings = scenario.validate()?;
    if options.strict && !warnings.is_empty() {
        return Err(Error::Validation(format!("strict mode: {}", warnings.join("; "))));
    }
    let eps = match &options.eps_ladder {
        Some(e) => {
            if e.is_empty() || e.iter().any(|v| !(*v > 0.0 && *v < 1.0)) || e.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Validation("--eps-ladder must be strictly descending values in (0, 1)".into()));
            }
            e.clone()
        }
        None => scenario.eps_ladder()?,
    };
    let profile = solve_profile(scenario.p, PROFILE_GRID)?;
    let background = scenario.background().clone();
    let base = scenario.base_grid()?;
    let extrema = list_extrema(&background, &base);

    let location = if scenario.mode == Mode::Boundary { Location::Boundary } else { Location::Interior };
    let kind = scenario.vortices.extremum;
    let initial_plus: Vec<Point> = match &scenario.vortices.plus {
        Centers::Points(v) => v.clone(),
        Centers::Auto { auto } => {
            let found = extrema.of(kind, location);
            if found.len() < *auto {
                return Err(Error::Validation(format!(
                    "asked for {auto} automatic centers, q^2/b has {} strict {:?} points",
                    found.len(),
                    kind
                )));
            }
            found[..*auto].iter().map(|c| c.point).collect()
        }
    };
    let initial_minus = scenario.explicit_minus();
    let initial: Vec<Point> = initial_plus.iter().chain(&initial_minus).copied().collect();
    let targets = match &scenario.vortices.targets {
        Some(t) => t.clone(),
        None => initial
            .iter()
            .map(|&z| {
                extrema
                    .of(kind, location)
                    .iter()
                    .map(|c| c.point)
                    .filter(|p| (p[0] - z[0]).hypot(p[1] - z[1]) <= scenario.vortices.search_radius)
                    .min_by(|a, b| {
                        let da = (a[0] - z[0]).hypot(a[1] - z[1]);
                        let db = (b[0] - z[0]).hypot(b[1] - z[1]);
                        da.total_cmp(&db)
                    })
                    .unwrap_or(z)
            })
            .collect(),
    };
    if !extrema.warnings.is_empty() && scenario.vortices.targets.is_none() && matches!(scenario.vortices.plus, Centers::Auto { .. }) {
        warnings.extend(extrema.warnings.iter().cloned());
    }

    let n_plus = initial_plus.len();
    let landscape_grid = if scenario.vortices.optimize && scenario.vortices.objective == Objective::Asymptotic {
        Some(landscape_grid(scenario, &initial)?)
    } else {
        None
    };
    let landscape_fields = match &landscape_grid {
        Some(g) => Some(BackgroundFields::new(background.clone(), g)?),
        None => None,
    };

    let mut rungs: Vec<Rung> = Vec::new();
    let mut optimizations = Vec::new();
    let mut failure = None;
    for &e in &eps {
        let located = if scenario.vortices.optimize {
            let quad_grid;
            let quad_fields;
            let (g, f) = match (&landscape_grid, &landscape_fields) {
                (Some(g), Some(f)) => (g, f),
                _ => {
                    let problem = problem_for(scenario, &background, &initial_plus, &initial_minus);
                    quad_grid = build_grid_with(scenario.domain, &problem.grid_spec(e, &profile)?)?;
                    quad_fields = BackgroundFields::new(background.clone(), &quad_grid)?;
                    (&quad_grid, &quad_fields)
                }
            };
            let result = EnergyLandscape::new(g, f, &profile, scenario.p, e).and_then(|landscape| {
                let region = match scenario.mode {
                    Mode::Boundary => SearchRegion::boundary(initial.clone(), n_plus, scenario.admissibility()),
                    _ => SearchRegion::interior(initial.clone(), n_plus, scenario.vortices.search_radius, scenario.admissibility()),
                };
                optimize_centers(&landscape, &region, scenario.vortices.objective, kind, &scenario.optimizer)
            });
            match result {
                Ok(r) => Some(r),
                Err(err) => {
                    failure = Some((e, err));
                    break;
                }
            }
        } else {
            None
        };
        let centers = located.as_ref().map(|r| r.centers.clone()).unwrap_or_else(|| initial.clone());
        let problem = problem_for(scenario, &background, &centers[..n_plus], &centers[n_plus..]);
        match problem.solve(e, &profile, rungs.last()) {
            Ok(r) => {
                rungs.push(r);
                optimizations.push(located);
            }
            Err(err) => {
                failure = Some((e, err));
                break;
            }
        }
    }

    let records: Vec<RungRecord> = rungs
        .par_iter()
        .zip(optimizations.par_iter())
        .enumerate()
        .map(|(i, (rung, opt))| rung_record(i, rung, opt.as_ref(), scenario.vortices.optimize.then_some(&initial)))
        .collect();

    let mut invariant_failures = Vec::new();
    let mut rows = Vec::new();
    for (rung, rec) in rungs.iter().zip(&records) {
        match &rec.cores {
            Some(c) if c.count_plus == n_plus && c.count_minus == initial_minus.len() => {}
            Some(c) => invariant_failures.push(format!(
                "eps {:.4e}: {} positive and {} negative cores, expected {} and {}",
                rec.eps,
                c.count_plus,
                c.count_minus,
                n_plus,
                initial_minus.len()
            )),
            None => invariant_failures.push(format!("eps {:.4e}: positivity set is empty", rec.eps)),
        }
        if rec.divergence_relative > 1e-10 {
            invariant_failures.push(format!("eps {:.4e}: div(b v) relative residual {:.2e}", rec.eps, rec.divergence_relative));
        }
        if rec.boundary_sup != 0.0 {
            invariant_failures.push(format!("eps {:.4e}: solution is not zero on the boundary", rec.eps));
        }
        match trend_row(rung, &targets) {
            Ok(r) => rows.push(r),
            Err(Error::EmptyCore) => {}
            Err(e) => return Err(e),
        }
    }
    let trend = TrendTable::from_rows(rows);
    for pair in trend.rows.windows(2) {
        if pair[1].circ_error > pair[0].circ_error {
            warnings.push(format!("circulation error grew from eps {:.4e} to {:.4e}", pair[0].eps, pair[1].eps));
        }
        if pair[1].correction_sup > pair[0].correction_sup {
            warnings.push(format!("correction grew from eps {:.4e} to {:.4e}", pair[0].eps, pair[1].eps));
        }
    }

    Ok(ScenarioRun {
        scenario: scenario.clone(),
        eps,
        profile,
        extrema,
        initial_plus,
        initial_minus,
        targets,
        rungs,
        optimizations,
        records,
        trend,
        warnings,
        invariant_failures,
        failure,
        strict: options.strict,
    })
}

fn problem_for(scenario: &Scenario, background: &Background, plus: &[Point], minus: &[Point]) -> Problem {
    Problem {
        shape: scenario.domain,
        background: background.clone(),
        p: scenario.p,
        centers_plus: plus.to_vec(),
        centers_minus: minus.to_vec(),
        grid: scenario.grid.clone(),
        newton: scenario.solver,
    }
}

/// Grid for the reduced-energy search; in boundary mode the `η`-neighbourhood of each anchor is refined.
pub fn landscape_grid(scenario: &Scenario, anchors: &[Point]) -> Result<DomainGrid> {
    let mut spec = GridSpec { spacing: scenario.grid.spacing, refinements: scenario.grid.extra.clone(), grading: scenario.grid.grading };
    if scenario.mode == Mode::Boundary {
        let adm = scenario.admissibility();
        let fine = scenario.grid.spacing / 8.0;
        for &a in anchors {
            spec.refinements.push(Refinement { center: a, spacing: fine, plateau: adm.eta });
        }
    }
    build_grid_with(scenario.domain, &spec)
}

fn rung_record(index: usize, rung: &Rung, opt: Option<&OptimizeResult>, start: Option<&Vec<Point>>) -> RungRecord {
    let state = rung.state.as_ref().expect("solved rung");
    let cores = extract_cores(state, &rung.fields, &rung.grid).ok();
    let flow = reconstruct_flow(state, &rung.fields, &rung.grid);
    let boundary_sup = (0..rung.grid.node_count())
        .filter(|&k| rung.grid.kinds[k] != NodeKind::Interior)
        .map(|k| state.w[k].abs())
        .fold(0.0, f64::max);
    RungRecord {
        index,
        eps: state.eps,
        delta: state.delta,
        nodes: rung.grid.node_count(),
        unknowns: rung.grid.unknown_count(),
        min_spacing: rung.grid.min_spacing(),
        centers: rung.ansatz.vortices.iter().map(|v| v.center).collect(),
        signs: rung.ansatz.vortices.iter().map(|v| v.sign).collect(),
        q_hat: rung.ansatz.strengths(),
        core_radii: rung.ansatz.core_radii(),
        l_mult: rung.ansatz.l_mult,
        positivity_margin: rung.ansatz.positivity_margin,
        dominance_margin: rung.ansatz.dominance_margin,
        warm_started: rung.warm_started,
        newton_iterations: state.newton_trace.len().saturating_sub(1),
        residual_sup: state.residual_sup,
        residual_relative: state.residual_relative,
        residual_p: state.residual_p,
        correction_sup: state.correction_sup,
        optimizer: opt.map(|r| OptimizerRecord {
            start: start.cloned().unwrap_or_default(),
            centers: r.centers.clone(),
            k_asymptotic: r.report.k_asymptotic,
            i_quadrature: r.report.i_quadrature,
            evaluations: r.evaluations,
            slack: r.slack,
            alpha_hat: r.alpha_hat.clone(),
            c_hat: r.c_hat.clone(),
        }),
        projection: rung.projection.clone(),
        cores,
        circulation: circulation(state, &rung.fields, &rung.grid),
        divergence_relative: flow.divergence_relative,
        stationarity_relative: flow.stationarity_relative,
        stationarity_nodes: flow.stationarity_nodes,
        flux_error: flow.flux_error,
        boundary_sup,
    }
}

/// Where artifacts go: `--out`, then the scenario's `output.dir`, then `out/<name>`.
pub fn output_dir(scenario: &Scenario, options: &RunOptions) -> PathBuf {
    if let Some(d) = &options.out {
        return d.clone();
    }
    match &scenario.output.dir {
        Some(d) => scenario.base_dir.join(d),
        None => PathBuf::from("out").join(&scenario.name),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    crate_name: &'static str,
    version: &'static str,
    scenario: &'a Scenario,
    eps_ladder: &'a [f64],
    newton_tol: f64,
    newton_max_iter: usize,
    profile_grid: usize,
    profile_slope_at_one: f64,
    profile_pohozaev_errors: (f64, f64),
    seed: Option<u64>,
    curl_convention: &'static str,
    initial_plus: &'a [Point],
    initial_minus: &'a [Point],
    targets: &'a [Point],
    rungs: &'a [RungRecord],
    trend_fits: &'a [crate::diagnostics::TrendFit],
    warnings: &'a [String],
    invariant_failures: &'a [String],
    failure: Option<String>,
    exit_code: i32,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct NewtonLine {
    rung: usize,
    eps: f64,
    iteration: usize,
    residual_sup: f64,
    residual_l2: f64,
    damping: f64,
    picard: bool,
}

fn create(dir: &Path, name: &str, list: &mut Vec<String>) -> Result<BufWriter<File>> {
    list.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Write CSV/JSON artifacts and the manifest into `dir`.
pub fn write_artifacts(run: &ScenarioRun, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    {
        let mut f = create(dir, "scenario.toml", &mut files)?;
        f.write_all(run.scenario.to_toml()?.as_bytes())?;
    }
    run.profile.write_csv(create(dir, "profile.csv", &mut files)?)?;
    run.trend.write_csv(create(dir, "trend.csv", &mut files)?)?;
    serde_json::to_writer_pretty(create(dir, "extrema.json", &mut files)?, &run.extrema)?;
    {
        let mut f = create(dir, "newton.jsonl", &mut files)?;
        for (i, rung) in run.rungs.iter().enumerate() {
            let state = rung.state.as_ref().expect("solved rung");
            for s in &state.newton_trace {
                let line = NewtonLine {
                    rung: i,
                    eps: state.eps,
                    iteration: s.iteration,
                    residual_sup: s.residual_sup,
                    residual_l2: s.residual_l2,
                    damping: s.damping,
                    picard: s.picard,
                };
                serde_json::to_writer(&mut f, &line)?;
                f.write_all(b"\n")?;
            }
        }
    }
    if run.optimizations.iter().any(Option::is_some) {
        let mut f = create(dir, "optimizer_trace.csv", &mut files)?;
        writeln!(f, "rung,evaluation,value,centers")?;
        for (i, o) in run.optimizations.iter().enumerate() {
            for t in o.iter().flat_map(|r| &r.trace) {
                let c: Vec<String> = t.centers.iter().map(|z| format!("{:.17e} {:.17e}", z[0], z[1])).collect();
                writeln!(f, "{i},{},{:.17e},{}", t.evaluation, t.value, c.join(" "))?;
            }
        }
    }
    let last = run.rungs.len().saturating_sub(1);
    for (i, rung) in run.rungs.iter().enumerate() {
        let dump = match run.scenario.output.fields {
            FieldDump::None => false,
            FieldDump::Last => i == last,
            FieldDump::All => true,
        };
        if !dump {
            continue;
        }
        let state = rung.state.as_ref().expect("solved rung");
        write_field_csv(create(dir, &format!("rung-{i}-field.csv"), &mut files)?, &rung.grid, state, &rung.fields)?;
        let flow = reconstruct_flow(state, &rung.fields, &rung.grid);
        write_flow_csv(create(dir, &format!("rung-{i}-flow.csv"), &mut files)?, &rung.grid, &flow)?;
    }
    files.push("manifest.json".into());
    let manifest = Manifest {
        crate_name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: &run.scenario,
        eps_ladder: &run.eps,
        newton_tol: run.scenario.solver.tol,
        newton_max_iter: run.scenario.solver.max_iter,
        profile_grid: PROFILE_GRID,
        profile_slope_at_one: run.profile.slope_at_one,
        profile_pohozaev_errors: run.profile.pohozaev_errors(),
        seed: None,
        curl_convention: CURL_CONVENTION,
        initial_plus: &run.initial_plus,
        initial_minus: &run.initial_minus,
        targets: &run.targets,
        rungs: &run.records,
        trend_fits: &run.trend.fits,
        warnings: &run.warnings,
        invariant_failures: &run.invariant_failures,
        failure: run.failure.as_ref().map(|(e, err)| format!("eps {e:.6e}: {err}")),
        exit_code: run.exit_code(),
        artifacts: files,
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("manifest.json"))?), &manifest)?;
    Ok(())
}

/// Parse, run and write; returns the exit status and the run when one happened.
pub fn run_scenario(path: &Path, options: &RunOptions) -> (i32, std::result::Result<ScenarioRun, Error>) {
    let scenario = match Scenario::from_path(path) {
        Ok(s) => s,
        Err(e) => return (exit_code(&e), Err(e)),
    };
    let run = match execute(&scenario, options) {
        Ok(r) => r,
        Err(e) => return (exit_code(&e), Err(e)),
    };
    let dir = output_dir(&scenario, options);
    if let Err(e) = write_artifacts(&run, &dir) {
        return (exit_code(&e), Err(e));
    }
    (run.exit_code(), Ok(run))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub x: f64,
    pub y: f64,
    pub ratio: f64,
    pub k: f64,
}

/// Reduced energy of a single vortex over a lattice of positions at one ε.
pub fn landscape(scenario: &Scenario, eps: f64, lattice: usize) -> Result<Vec<LandscapeRow>> {
    scenario.validate()?;
    let profile = solve_profile(scenario.p, PROFILE_GRID)?;
    let grid = scenario.base_grid()?;
    let fields = BackgroundFields::new(scenario.background().clone(), &grid)?;
    let land = EnergyLandscape::new(&grid, &fields, &profile, scenario.p, eps)?;
    let (lo, hi) = scenario.domain.bounding_box();
    let mut points = Vec::new();
    for j in 0..=lattice {
        for i in 0..=lattice {
            let p = [
                lo[0] + (hi[0] - lo[0]) * i as f64 / lattice as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / lattice as f64,
            ];
            if scenario.domain.contains(p) {
                points.push(p);
            }
        }
    }
    let bg = scenario.background();
    Ok(points
        .par_iter()
        .filter_map(|&z| {
            land.evaluate(&[z], 1, Objective::Asymptotic)
                .ok()
                .map(|r| LandscapeRow { x: z[0], y: z[1], ratio: bg.ratio(z), k: r.k_asymptotic })
        })
        .collect())
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse `--eps-ladder`: comma-separated values, each a number or `e-K` for `exp(−K)`.
pub fn parse_eps_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let v = match s.strip_prefix("e-") {
                Some(k) => k.parse::<f64>().map(|k| (-k).exp()),
                None => s.parse::<f64>(),
            };
            v.map_err(|_| Error::Parse(format!("bad eps value `{s}`")))
        })
        .collect()
}

/// Boundary points of `shape` are rejected as interior candidates; exposed for the CLI summary.
pub fn describe(c: &Candidate, shape: &Shape) -> String {
    format!(
        "{:?} {:?} at ({:.6}, {:.6}) value {:.6e} margin {:.3e} dist {:.3e}",
        c.location,
        c.kind,
        c.point[0],
        c.point[1],
        c.value,
        c.margin,
        shape.distance_to_boundary(c.point)
    )
}
