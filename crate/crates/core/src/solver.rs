//! Newton solver for the discretized free-boundary problem and ε-continuation.

use faer::linalg::solvers::Solve;
use serde::{Deserialize, Serialize};

use crate::ansatz::{assemble_ansatz, box_gradient, scale_parameters, VortexAnsatz};
use crate::error::{Error, Result};
use crate::geometry::{
    Background, BackgroundFields, DomainGrid, GreenCache, GreenSolver, GridSpec, NodeKind, Point, Refinement, Shape,
    build_grid_with,
};
use crate::profile::{ProfileTable, ScaledVortex};
use crate::sparse::TripletMatrix;

/// Dual cell of an unknown whose 3×3 neighbourhood is interior: the source is averaged over it.
#[derive(Debug, Clone, Copy)]
struct DualCell {
    /// Unknown indices of the 3×3 block, row-major from the south-west corner.
    block: [usize; 9],
    /// Quadrant areas over the dual-cell area, ordered SW, SE, NW, NE.
    quadrants: [f64; 4],
}

/// Gauss–Legendre points on `[0, 1/2]` and their weights (summing to 1).
const GAUSS: [(f64, f64); 3] = [
    (0.25 - 0.25 * 0.774_596_669_241_483_4, 5.0 / 18.0),
    (0.25, 8.0 / 18.0),
    (0.25 + 0.25 * 0.774_596_669_241_483_4, 5.0 / 18.0),
];

/// Block slots of the four corners of quadrant `(sx, sy)`: center, x-neighbour, y-neighbour, diagonal.
fn quadrant_slots(q: usize) -> ([isize; 2], [usize; 4]) {
    let sx: isize = if q.is_multiple_of(2) { -1 } else { 1 };
    let sy: isize = if q < 2 { -1 } else { 1 };
    let c = 4isize;
    ([sx, sy], [c as usize, (c + sx) as usize, (c + 3 * sy) as usize, (c + sx + 3 * sy) as usize])
}

/// Discrete `F(w) = −δ² div(∇w/b) − S(w)` on the unknowns. `S` is `b (w−q)₊^p (− b (−w−q)₊^p)`
/// averaged over the dual cell of the bilinear interpolant where the neighbourhood is interior,
/// and sampled at the node elsewhere.
pub struct Operator<'a> {
    grid: &'a DomainGrid,
    faces: Vec<[f64; 4]>,
    b: Vec<f64>,
    q: Vec<f64>,
    cells: Vec<Option<DualCell>>,
    delta2: f64,
    p: f64,
    pair: bool,
}

impl<'a> Operator<'a> {
    pub fn new(grid: &'a DomainGrid, fields: &BackgroundFields, delta: f64, p: f64, pair: bool) -> Self {
        let nx = grid.nx();
        let cells = grid
            .stencils
            .iter()
            .map(|st| {
                let (i, j) = (st.node % nx, st.node / nx);
                if i == 0 || j == 0 || i + 1 >= nx || j + 1 >= grid.ny() {
                    return None;
                }
                let mut block = [0usize; 9];
                for dj in 0..3 {
                    for di in 0..3 {
                        block[3 * dj + di] = grid.unknown_of((j + dj - 1) * nx + i + di - 1)?;
                    }
                }
                let (hw, he) = (grid.xs[i] - grid.xs[i - 1], grid.xs[i + 1] - grid.xs[i]);
                let (hs, hn) = (grid.ys[j] - grid.ys[j - 1], grid.ys[j + 1] - grid.ys[j]);
                let area = (hw + he) * (hs + hn);
                Some(DualCell { block, quadrants: [hw * hs / area, he * hs / area, hw * hn / area, he * hn / area] })
            })
            .collect();
        Self {
            grid,
            faces: grid.face_coefficients(&fields.inv_depth()),
            b: grid.gather(&fields.b),
            q: grid.gather(&fields.q),
            cells,
            delta2: delta * delta,
            p,
            pair,
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.unknown_count()
    }

    fn nodal(&self, x: &[f64]) -> Vec<f64> {
        self.grid.scatter(x, &|_| 0.0)
    }

    /// `b g₊^p` and its derivative in `g`, for both families.
    fn density(&self, b: f64, g: f64, h: f64) -> (f64, f64, f64) {
        let p = self.p;
        let mut s = b * g.max(0.0).powf(p);
        let dg = p * b * g.max(0.0).powf(p - 1.0);
        let mut dh = 0.0;
        if self.pair {
            s -= b * h.max(0.0).powf(p);
            dh = p * b * h.max(0.0).powf(p - 1.0);
        }
        (s, dg, dh)
    }

    /// Whether the source can be nonzero anywhere in the block.
    fn active(&self, x: &[f64], cell: &DualCell) -> bool {
        cell.block.iter().any(|&k| x[k] > self.q[k] || (self.pair && -x[k] > self.q[k]))
    }

    /// Cell average of the source and, if asked, its derivatives with respect to the block values.
    fn averaged(&self, x: &[f64], cell: &DualCell, mut grad: Option<&mut [f64; 9]>) -> f64 {
        let mut total = 0.0;
        for (qd, &frac) in cell.quadrants.iter().enumerate() {
            let (_, slots) = quadrant_slots(qd);
            let k = slots.map(|sl| cell.block[sl]);
            for &(tx, wx) in &GAUSS {
                for &(ty, wy) in &GAUSS {
                    let phi = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
                    let (mut w, mut q, mut b) = (0.0, 0.0, 0.0);
                    for c in 0..4 {
                        w += phi[c] * x[k[c]];
                        q += phi[c] * self.q[k[c]];
                        b += phi[c] * self.b[k[c]];
                    }
                    let weight = frac * wx * wy;
                    let (s, dg, dh) = self.density(b, w - q, -w - q);
                    total += weight * s;
                    if let Some(g) = grad.as_deref_mut() {
                        for c in 0..4 {
                            g[slots[c]] += weight * phi[c] * (dg + dh);
                        }
                    }
                }
            }
        }
        total
    }

    /// `S(w)` at the unknowns.
    pub fn source(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|u| match &self.cells[u] {
                Some(cell) if self.active(x, cell) => self.averaged(x, cell, None),
                Some(_) => 0.0,
                None => self.density(self.b[u], x[u] - self.q[u], -x[u] - self.q[u]).0,
            })
            .collect()
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let diff = self.grid.apply_diffusion(&self.faces, &self.nodal(x), &|_| 0.0);
        diff.iter().zip(self.source(x)).map(|(d, s)| self.delta2 * d - s).collect()
    }

    /// Linearization `δ²A − S′(w)`. The second value lists the unknowns with block couplings;
    /// the sparsity pattern changes exactly when this list does.
    pub fn jacobian_with_pattern(&self, x: &[f64]) -> (TripletMatrix, Vec<usize>) {
        let mut diag = vec![0.0; x.len()];
        let mut blocks = Vec::new();
        for u in 0..x.len() {
            match &self.cells[u] {
                Some(cell) if self.active(x, cell) => blocks.push(u),
                Some(_) => {}
                None => {
                    let (_, dg, dh) = self.density(self.b[u], x[u] - self.q[u], -x[u] - self.q[u]);
                    diag[u] = -(dg + dh);
                }
            }
        }
        let mut m = self.grid.diffusion_matrix(&self.faces, self.delta2, Some(&diag));
        for &u in &blocks {
            let cell = self.cells[u].as_ref().expect("dual cell");
            let mut g = [0.0; 9];
            self.averaged(x, cell, Some(&mut g));
            for (slot, &k) in cell.block.iter().enumerate() {
                m.push(u, k, -g[slot]);
            }
        }
        (m, blocks)
    }

    pub fn jacobian(&self, x: &[f64]) -> TripletMatrix {
        self.jacobian_with_pattern(x).0
    }

    pub fn diffusion(&self) -> TripletMatrix {
        self.grid.diffusion_matrix(&self.faces, self.delta2, None)
    }

    pub fn positive_count(&self, x: &[f64]) -> usize {
        x.iter()
            .zip(&self.q)
            .filter(|(&w, &q)| w > q || (self.pair && -w > q))
            .count()
    }
}

/// Nodal residual field `F(w)`, zero off the interior nodes.
pub fn apply_operator(w: &[f64], fields: &BackgroundFields, delta: f64, p: f64, grid: &DomainGrid, pair_mode: bool) -> Vec<f64> {
    let op = Operator::new(grid, fields, delta, p, pair_mode);
    let r = op.residual(&grid.gather(w));
    grid.scatter(&r, &|_| 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    /// Convergence when `sup|F| ≤ tol · sup|b (w−q)₊^p|`.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub min_damping: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60, armijo: 1e-4, min_damping: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub iteration: usize,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub damping: f64,
    pub picard: bool,
}

/// Converged (or last) iterate of the Newton solve.
#[derive(Debug, Clone)]
pub struct SolvedState {
    pub w: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
    pub p: f64,
    pub pair_mode: bool,
    /// `w − V`.
    pub correction: Vec<f64>,
    pub correction_sup: f64,
    pub residual_sup: f64,
    /// `sup|F| / sup|b (w−q)₊^p|`.
    pub residual_relative: f64,
    pub residual_p: f64,
    pub rhs_scale: f64,
    pub newton_trace: Vec<NewtonStep>,
    pub converged: bool,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton from `initial` (nodal, zero on the boundary). `reference` is the ansatz used for the correction.
#[allow(clippy::too_many_arguments)]
pub fn newton_solve(
    initial: &[f64],
    reference: &[f64],
    fields: &BackgroundFields,
    eps: f64,
    p: f64,
    grid: &DomainGrid,
    pair_mode: bool,
    options: &NewtonOptions,
) -> Result<SolvedState> {
    let (delta, _) = scale_parameters(eps, p)?;
    let op = Operator::new(grid, fields, delta, p, pair_mode);
    let mut x = grid.gather(initial);
    let initially_positive = op.positive_count(&x) > 0;
    let mut trace = Vec::new();
    let mut symbolic = None;
    let mut f = op.residual(&x);
    let mut converged = false;
    for iteration in 0..=options.max_iter {
        let scale = sup(&op.source(&x));
        let r_sup = sup(&f);
        let r_l2 = l2(&f);
        if r_sup <= options.tol * scale || r_sup == 0.0 {
            trace.push(NewtonStep { iteration, residual_sup: r_sup, residual_l2: r_l2, damping: 0.0, picard: false });
            converged = true;
            break;
        }
        if iteration == options.max_iter {
            trace.push(NewtonStep { iteration, residual_sup: r_sup, residual_l2: r_l2, damping: 0.0, picard: false });
            break;
        }
        let (jac, pattern) = op.jacobian_with_pattern(&x);
        let jac = jac.to_csc()?;
        if symbolic.as_ref().is_none_or(|(p, _)| *p != pattern) {
            symbolic = Some((pattern, jac.symbolic_lu()?));
        }
        let lu = jac.lu_with(&symbolic.as_ref().expect("symbolic factorization").1)?;
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let dx = lu.solve(&neg)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda >= options.min_damping {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            let ft = op.residual(&trial);
            if l2(&ft) <= (1.0 - options.armijo * lambda) * r_l2 {
                accepted = Some((trial, ft));
                break;
            }
            lambda *= 0.5;
        }
        let picard = accepted.is_none();
        let (xn, fnew) = match accepted {
            Some(v) => v,
            None => {
                let a = op.diffusion().to_csc()?;
                let rhs = op.source(&x);
                let xn = a.lu()?.solve(&rhs)?;
                let fnew = op.residual(&xn);
                (xn, fnew)
            }
        };
        trace.push(NewtonStep { iteration, residual_sup: r_sup, residual_l2: r_l2, damping: if picard { 0.0 } else { lambda }, picard });
        x = xn;
        f = fnew;
        if initially_positive && op.positive_count(&x) == 0 {
            return Err(Error::FellToTrivial { iterations: iteration + 1 });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { iterations: iteration + 1, residual: f64::INFINITY });
        }
    }
    let w = grid.scatter(&x, &|_| 0.0);
    let correction: Vec<f64> = w.iter().zip(reference).map(|(a, b)| a - b).collect();
    let residual_sup = sup(&f);
    let rhs_scale = sup(&op.source(&x));
    let nodal_f = grid.scatter(&f, &|_| 0.0);
    let residual_p = grid.integrate(&nodal_f.iter().map(|v| v.abs().powf(p)).collect::<Vec<_>>()).powf(1.0 / p);
    let state = SolvedState {
        correction_sup: sup(&correction),
        correction,
        w,
        eps,
        delta,
        p,
        pair_mode,
        residual_sup,
        residual_relative: if rhs_scale > 0.0 { residual_sup / rhs_scale } else { residual_sup },
        residual_p,
        rhs_scale,
        newton_trace: trace,
        converged,
    };
    if !converged {
        return Err(Error::Diverged { iterations: options.max_iter, residual: residual_sup });
    }
    Ok(state)
}

/// Translation modes `b (σA − q)₊^{p−1} ∂_d A` of each vortex in ansatz `A`, at the unknowns,
/// normalized in the weighted `L²` norm. Order: `(x, y)` per vortex.
pub fn translation_modes(ansatz: &VortexAnsatz, fields: &BackgroundFields, grid: &DomainGrid) -> Vec<Vec<f64>> {
    let a = &ansatz.field;
    let grad = box_gradient(grid, a);
    let n = grid.node_count();
    let mut modes = vec![vec![0.0; n]; 2 * ansatz.vortices.len()];
    for k in 0..n {
        if grid.kinds[k] != NodeKind::Interior {
            continue;
        }
        let x = grid.point(k);
        let dist = |z: Point| (x[0] - z[0]).hypot(x[1] - z[1]);
        let owner = ansatz
            .vortices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.sign * a[k] > fields.q[k])
            .min_by(|(_, u), (_, v)| dist(u.center).total_cmp(&dist(v.center)));
        if let Some((i, v)) = owner {
            let e = fields.b[k] * (v.sign * a[k] - fields.q[k]).powf(ansatz.p - 1.0);
            modes[2 * i][k] = e * grad[k][0];
            modes[2 * i + 1][k] = e * grad[k][1];
        }
    }
    modes
        .into_iter()
        .map(|m| {
            let norm = grid.integrate(&m.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
            let m = if norm > 0.0 { m.iter().map(|v| v / norm).collect() } else { m };
            grid.gather(&m)
        })
        .collect()
}

/// Solution of the projected problem at fixed centers.
#[derive(Debug, Clone)]
pub struct Bordered {
    /// Values at the unknowns.
    pub x: Vec<f64>,
    /// Coefficients `c` of `F(w) = Σ c_k U_k`.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

/// Newton on `F(w) = Σ c_k U_k`, `⟨w − A, U_k⟩ = 0` for the unknowns `(w, c)`.
#[allow(clippy::too_many_arguments)]
pub fn bordered_solve(
    op: &Operator,
    grid: &DomainGrid,
    initial: &[f64],
    anchor: &[f64],
    modes: &[Vec<f64>],
    options: &NewtonOptions,
) -> Result<Bordered> {
    let n = op.dim();
    let m = modes.len();
    let weights = grid.gather(&grid.quad_weights);
    let support: Vec<Vec<usize>> = modes.iter().map(|u| (0..n).filter(|&j| u[j] != 0.0).collect()).collect();
    let eval = |x: &[f64], c: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut f = op.residual(x);
        for (k, u) in modes.iter().enumerate() {
            for &j in &support[k] {
                f[j] -= c[k] * u[j];
            }
        }
        let g = support
            .iter()
            .zip(modes)
            .map(|(sup_k, u)| sup_k.iter().map(|&j| weights[j] * (x[j] - anchor[j]) * u[j]).sum())
            .collect();
        (f, g)
    };
    let merit = |f: &[f64], g: &[f64]| (f.iter().chain(g).map(|v| v * v).sum::<f64>()).sqrt();
    let mut x = initial.to_vec();
    let mut c = vec![0.0; m];
    let (mut f, mut g) = eval(&x, &c);
    let mut symbolic = None;
    for iteration in 0..=options.max_iter {
        let scale = sup(&op.source(&x));
        let x_scale = sup(&x).max(f64::MIN_POSITIVE);
        if sup(&f) <= options.tol * scale && sup(&g) <= options.tol * x_scale {
            return Ok(Bordered { x, multipliers: c, iterations: iteration });
        }
        if iteration == options.max_iter {
            break;
        }
        let (mut jac, pattern) = op.jacobian_with_pattern(&x);
        jac.grow(n + m);
        for (k, u) in modes.iter().enumerate() {
            for &j in &support[k] {
                jac.push(j, n + k, -u[j]);
                jac.push(n + k, j, weights[j] * u[j]);
            }
            jac.push(n + k, n + k, 0.0);
        }
        let jac = jac.to_csc()?;
        if symbolic.as_ref().is_none_or(|(p, _)| *p != pattern) {
            symbolic = Some((pattern, jac.symbolic_lu()?));
        }
        let lu = jac.lu_with(&symbolic.as_ref().expect("symbolic factorization").1)?;
        let rhs: Vec<f64> = f.iter().chain(&g).map(|v| -v).collect();
        let d = lu.solve(&rhs)?;
        let r0 = merit(&f, &g);
        let mut lambda = 1.0;
        loop {
            let xt: Vec<f64> = x.iter().zip(&d[..n]).map(|(a, b)| a + lambda * b).collect();
            let ct: Vec<f64> = c.iter().zip(&d[n..]).map(|(a, b)| a + lambda * b).collect();
            let (ft, gt) = eval(&xt, &ct);
            if merit(&ft, &gt) <= (1.0 - options.armijo * lambda) * r0 || lambda < options.min_damping {
                x = xt;
                c = ct;
                f = ft;
                g = gt;
                break;
            }
            lambda *= 0.5;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { iterations: iteration + 1, residual: f64::INFINITY });
        }
        if op.positive_count(&x) == 0 {
            return Err(Error::FellToTrivial { iterations: iteration + 1 });
        }
    }
    Err(Error::Diverged { iterations: options.max_iter, residual: sup(&f) })
}

/// Outcome of the center search on the projected problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub start: Vec<Point>,
    pub centers: Vec<Point>,
    pub initial_multipliers: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub outer_iterations: usize,
}

/// Iterations allowed for a plain Newton attempt before the projected solve takes over.
const PROBE_ITER: usize = 25;
const MAX_OUTER: usize = 20;

/// `|c|` measured against the size of the nonlinearity.
fn multiplier_size(c: &[f64], modes: &[Vec<f64>], scale: f64) -> f64 {
    c.iter().zip(modes).map(|(c, u)| (c * sup(u)).abs()).fold(0.0, f64::max) / scale.max(f64::MIN_POSITIVE)
}

/// How a rung's grid is refined around the vortex centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    pub spacing: f64,
    /// Target cells per core radius at the centers.
    #[serde(default = "default_cells_per_core")]
    pub cells_per_core: f64,
    /// Half-width of the uniformly fine patch, in core radii.
    #[serde(default = "default_plateau")]
    pub plateau_cores: f64,
    #[serde(default = "default_grading")]
    pub grading: f64,
    /// Additional fixed refinements.
    #[serde(default)]
    pub extra: Vec<Refinement>,
}

fn default_cells_per_core() -> f64 {
    8.0
}

fn default_plateau() -> f64 {
    3.0
}

fn default_grading() -> f64 {
    0.15
}

impl GridPolicy {
    pub fn uniform(spacing: f64) -> Self {
        Self { spacing, cells_per_core: 0.0, plateau_cores: 0.0, grading: default_grading(), extra: Vec::new() }
    }

    pub fn adaptive(spacing: f64) -> Self {
        Self {
            spacing,
            cells_per_core: default_cells_per_core(),
            plateau_cores: default_plateau(),
            grading: default_grading(),
            extra: Vec::new(),
        }
    }
}

/// A vortex problem on a fixed domain and background; rungs differ only in ε.
#[derive(Debug, Clone)]
pub struct Problem {
    pub shape: Shape,
    pub background: Background,
    pub p: f64,
    pub centers_plus: Vec<Point>,
    pub centers_minus: Vec<Point>,
    pub grid: GridPolicy,
    pub newton: NewtonOptions,
}

/// Everything built at one ε.
#[derive(Debug, Clone)]
pub struct Rung {
    pub eps: f64,
    pub grid: DomainGrid,
    pub fields: BackgroundFields,
    pub green: GreenCache,
    pub ansatz: VortexAnsatz,
    pub state: Option<SolvedState>,
    /// Whether the warm start was used (`false` when the pure ansatz was the initial iterate).
    pub warm_started: bool,
    /// Set when the centers were moved by the projected solve.
    pub projection: Option<Projection>,
}

impl Problem {
    pub fn pair_mode(&self) -> bool {
        !self.centers_minus.is_empty()
    }

    pub fn centers(&self) -> Vec<Point> {
        self.centers_plus.iter().chain(&self.centers_minus).copied().collect()
    }

    /// Grid spec for a given ε: fine spacing `s/cells_per_core` around each center.
    pub fn grid_spec(&self, eps: f64, profile: &ProfileTable) -> Result<GridSpec> {
        let mut spec = GridSpec { spacing: self.grid.spacing, refinements: self.grid.extra.clone(), grading: self.grid.grading };
        if self.grid.cells_per_core > 0.0 {
            let (delta, _) = scale_parameters(eps, self.p)?;
            let r = 2.0 * self.shape.diameter();
            for z in self.centers() {
                let b = self.background.depth(z);
                let q = self.background.stream(z);
                let s = ScaledVortex::new(delta, b, q, r, profile)?.core_radius();
                let fine = (s / self.grid.cells_per_core).min(self.grid.spacing);
                spec.refinements.push(Refinement { center: z, spacing: fine, plateau: self.grid.plateau_cores * s });
            }
        }
        Ok(spec)
    }

    /// Grid, fields, Green data and ansatz at `eps`.
    pub fn setup(&self, eps: f64, profile: &ProfileTable) -> Result<Rung> {
        let grid = build_grid_with(self.shape, &self.grid_spec(eps, profile)?)?;
        let fields = BackgroundFields::new(self.background.clone(), &grid)?;
        let green = GreenSolver::new(&grid)?.cache(&self.centers())?;
        let ansatz = assemble_ansatz(self.centers_plus.len(), eps, self.p, &grid, &green, &fields, profile)?;
        Ok(Rung { eps, grid, fields, green, ansatz, state: None, warm_started: false, projection: None })
    }

    /// Solve one rung, optionally warm-started by the correction of a previous rung.
    /// Plain Newton is tried first; if it stalls, the centers are moved until the projected
    /// problem has vanishing multipliers and plain Newton finishes from there.
    pub fn solve(&self, eps: f64, profile: &ProfileTable, previous: Option<&Rung>) -> Result<Rung> {
        let mut rung = self.setup(eps, profile)?;
        let pure = rung.ansatz.field.clone();
        let probe = NewtonOptions { max_iter: self.newton.max_iter.min(PROBE_ITER), ..self.newton };
        let mut initial = pure.clone();
        let mut warm = false;
        if let Some((prev_rung, prev_state)) = previous.and_then(|r| r.state.as_ref().map(|s| (r, s))) {
            for st in &rung.grid.stencils {
                let x = rung.grid.point(st.node);
                if prev_rung.grid.shape.distance_to_boundary(x) > 0.0 {
                    initial[st.node] += prev_rung.grid.interpolate(&prev_state.correction, x);
                }
            }
            warm = true;
        }
        // Once a rung has needed the center search, later (smaller ε) rungs will too.
        let probing = previous.is_none_or(|r| r.projection.is_none());
        if probing && warm {
            if let Ok(state) = newton_solve(&initial, &pure, &rung.fields, eps, self.p, &rung.grid, self.pair_mode(), &probe) {
                rung.state = Some(state);
                rung.warm_started = true;
                return Ok(rung);
            }
        }
        if probing {
            if let Ok(state) = newton_solve(&pure, &pure, &rung.fields, eps, self.p, &rung.grid, self.pair_mode(), &probe) {
                rung.state = Some(state);
                return Ok(rung);
            }
        }
        let start = if warm { initial } else { pure };
        self.solve_projected(&mut rung, profile, &start)?;
        rung.warm_started = warm;
        Ok(rung)
    }

    /// Center search on the projected problem over the fixed rung grid, then a plain Newton polish.
    pub fn solve_projected(&self, rung: &mut Rung, profile: &ProfileTable, initial: &[f64]) -> Result<()> {
        let eps = rung.eps;
        let n_plus = self.centers_plus.len();
        let grid = &rung.grid;
        let fields = &rung.fields;
        let op = Operator::new(grid, fields, rung.ansatz.delta, self.p, self.pair_mode());
        let solver = GreenSolver::new(grid)?;
        let inner = NewtonOptions { max_iter: self.newton.max_iter.max(PROBE_ITER), ..self.newton };
        // Each evaluation starts from the ansatz at `z` plus a correction carried over.
        let eval = |z: &[Point], correction: &[f64]| -> Result<(GreenCache, VortexAnsatz, Vec<Vec<f64>>, Bordered, Vec<f64>)> {
            let green = solver.cache(z)?;
            let ansatz = assemble_ansatz(n_plus, eps, self.p, grid, &green, fields, profile)?;
            let modes = translation_modes(&ansatz, fields, grid);
            let anchor = grid.gather(&ansatz.field);
            let x0: Vec<f64> = anchor.iter().zip(correction).map(|(a, c)| a + c).collect();
            let b = bordered_solve(&op, grid, &x0, &anchor, &modes, &inner)?;
            let correction = b.x.iter().zip(&anchor).map(|(x, a)| x - a).collect();
            Ok((green, ansatz, modes, b, correction))
        };
        let start = self.centers();
        let s_min = rung.ansatz.core_radii().into_iter().fold(f64::INFINITY, f64::min);
        let mut z = start.clone();
        let first: Vec<f64> = grid.gather(initial).iter().zip(grid.gather(&rung.ansatz.field)).map(|(x, a)| x - a).collect();
        let mut cur = eval(&z, &first)?;
        let initial_multipliers = cur.3.multipliers.clone();
        let size = |b: &Bordered, modes: &[Vec<f64>]| multiplier_size(&b.multipliers, modes, sup(&op.source(&b.x)));
        let dim = 2 * z.len();
        let mut outer = 0;
        // Differences are taken over the length of the last move: large steps see c(z) averaged
        // over the grid-scale ripple, small ones see the local slope.
        let (h_min, h_max) = (1e-3 * s_min, 0.5 * s_min);
        let mut h = h_max;
        while outer < MAX_OUTER && size(&cur.3, &cur.2) > self.newton.tol {
            outer += 1;
            let c0 = cur.3.multipliers.clone();
            let mut jac = vec![vec![0.0; dim]; dim];
            for k in 0..dim {
                let mut zk = z.clone();
                zk[k / 2][k % 2] += h;
                let ck = eval(&zk, &cur.4)?.3.multipliers;
                for r in 0..dim {
                    jac[r][k] = (ck[r] - c0[r]) / h;
                }
            }
            let a = faer::Mat::<f64>::from_fn(dim, dim, |i, j| jac[i][j]);
            let rhs = faer::Mat::<f64>::from_fn(dim, 1, |i, _| -c0[i]);
            let step = a.partial_piv_lu().solve(&rhs);
            let mut dz: Vec<f64> = (0..dim).map(|i| step[(i, 0)]).collect();
            let len = dz.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !len.is_finite() {
                return Err(Error::NoConvergence("projected center search".into()));
            }
            if len > s_min {
                dz.iter_mut().for_each(|v| *v *= s_min / len);
            }
            let before = size(&cur.3, &cur.2);
            let mut lambda = 1.0;
            let mut accepted = None;
            while lambda > 1e-3 {
                let zt: Vec<Point> =
                    z.iter().enumerate().map(|(i, p)| [p[0] + lambda * dz[2 * i], p[1] + lambda * dz[2 * i + 1]]).collect();
                if let Ok(next) = eval(&zt, &cur.4) {
                    if size(&next.3, &next.2) < before {
                        accepted = Some((zt, next));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((zt, next)) => {
                    let moved = lambda * len.min(s_min);
                    z = zt;
                    cur = next;
                    h = (0.5 * moved).clamp(h_min, h_max);
                    if moved < 1e-9 * s_min {
                        break;
                    }
                }
                None if h > h_min => h = (0.1 * h).max(h_min),
                None => break,
            }
        }
        let (green, ansatz, _, bordered, _) = cur;
        let w0 = grid.scatter(&bordered.x, &|_| 0.0);
        let state = newton_solve(&w0, &ansatz.field, fields, eps, self.p, grid, self.pair_mode(), &self.newton)?;
        rung.projection = Some(Projection {
            start,
            centers: z,
            initial_multipliers,
            multipliers: bordered.multipliers,
            outer_iterations: outer,
        });
        rung.green = green;
        rung.ansatz = ansatz;
        rung.state = Some(state);
        Ok(())
    }
}

/// Solved rungs in ladder order; stops at the first failure.
#[derive(Debug)]
pub struct Ladder {
    pub rungs: Vec<Rung>,
    pub failure: Option<(f64, Error)>,
}

pub fn continuation_ladder(problem: &Problem, eps_list: &[f64], profile: &ProfileTable) -> Result<Ladder> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Validation("eps ladder must be strictly descending".into()));
    }
    let mut rungs: Vec<Rung> = Vec::with_capacity(eps_list.len());
    let mut failure = None;
    for &eps in eps_list {
        match problem.solve(eps, profile, rungs.last()) {
            Ok(r) => rungs.push(r),
            Err(e) => {
                failure = Some((eps, e));
                break;
            }
        }
    }
    Ok(Ladder { rungs, failure })
}
