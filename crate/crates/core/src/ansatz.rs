//! Multi-vortex approximate solutions and their residuals.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BackgroundFields, DomainGrid, GreenCache, NodeKind, Point, Shape};
use crate::profile::{ProfileTable, ScaledVortex};

/// Default core-ball multiplier for the positivity check.
pub const DEFAULT_L_MULT: f64 = 8.0;

/// `δ = ε (ln 1/ε)^{(1−p)/2}` and the factor `|ln ε|` relating `u` and `w`.
pub fn scale_parameters(eps: f64, p: f64) -> Result<(f64, f64)> {
    if !(p > 1.0) {
        return Err(Error::ExponentOutOfRange(p));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Inadmissible(format!("eps = {eps} is not in (0, 1)")));
    }
    let log_factor = -eps.ln();
    Ok((eps * log_factor.powf(0.5 * (1.0 - p)), log_factor))
}

/// Constants of the admissible set of vortex configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub rho: f64,
    pub l_bar: f64,
    pub eta: f64,
    pub alpha: f64,
}

impl Admissibility {
    pub fn for_shape(shape: &Shape) -> Self {
        let d = shape.diameter();
        Self { rho: 0.1 * d, l_bar: 2.0, eta: 0.1 * d, alpha: 2.0 }
    }

    /// Interior regime: pairwise separation `ϱ^L̄` and boundary distance `ϱ`.
    pub fn check_interior(&self, shape: &Shape, centers: &[Point]) -> Result<()> {
        for (i, &z) in centers.iter().enumerate() {
            let d = shape.distance_to_boundary(z);
            if d < self.rho {
                return Err(Error::Inadmissible(format!(
                    "center {i} at ({:.4}, {:.4}) is {d:.4} from the boundary (need {:.4})",
                    z[0], z[1], self.rho
                )));
            }
            self.check_separation(centers, i)?;
        }
        Ok(())
    }

    /// Boundary regime: within `η` of its anchor and at least `|ln ε|^{−α}` from the boundary.
    pub fn check_boundary(&self, shape: &Shape, centers: &[Point], anchors: &[Point], eps: f64) -> Result<()> {
        let min_dist = (-eps.ln()).powf(-self.alpha);
        for (i, (&z, a)) in centers.iter().zip(anchors).enumerate() {
            let d = shape.distance_to_boundary(z);
            if d < min_dist {
                return Err(Error::Inadmissible(format!("center {i} is {d:.3e} from the boundary (need {min_dist:.3e})")));
            }
            let off = (z[0] - a[0]).hypot(z[1] - a[1]);
            if off >= self.eta {
                return Err(Error::Inadmissible(format!("center {i} is {off:.4} from its anchor (need < {:.4})", self.eta)));
            }
            self.check_separation(centers, i)?;
        }
        Ok(())
    }

    fn check_separation(&self, centers: &[Point], i: usize) -> Result<()> {
        let sep = self.rho.powf(self.l_bar);
        for (j, zj) in centers.iter().enumerate().skip(i + 1) {
            let zi = centers[i];
            let d = (zi[0] - zj[0]).hypot(zi[1] - zj[1]);
            if d < sep {
                return Err(Error::Inadmissible(format!("centers {i} and {j} are {d:.4} apart (need {sep:.4})")));
            }
        }
        Ok(())
    }
}

/// Coefficient matrix and right-hand side of the strength system.
#[derive(Debug, Clone)]
pub struct StrengthSystem {
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl StrengthSystem {
    /// Single family: `q̂_i (1 − g_ii/Λ) + Σ_{j≠i} q̂_j Ḡ_ij/Λ = q(z_i)`, `Λ = ln(R/ε)`.
    pub fn single(eps: f64, green: &GreenCache, fields: &BackgroundFields) -> Self {
        let m = green.len();
        Self::pair(eps, green, fields, m)
    }

    /// Sources `0..m` are the positive family, the rest negative; cross-family entries carry `−Ḡ/Λ`.
    pub fn pair(eps: f64, green: &GreenCache, fields: &BackgroundFields, m: usize) -> Self {
        let n = green.len();
        let lam = (green.r_enclosing / eps).ln();
        let mut matrix = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = fields.stream_at(green.sources[i]);
            for k in 0..n {
                matrix[i][k] = if k == i {
                    1.0 - green.robin[i] / lam
                } else if (k < m) == (i < m) {
                    green.interaction[i][k] / lam
                } else {
                    -green.interaction[k][i] / lam
                };
            }
        }
        Self { matrix, rhs }
    }

    /// Smallest row margin `|a_ii| − Σ_{j≠i} |a_ij|`.
    pub fn dominance_margin(&self) -> f64 {
        self.matrix
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let off: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.abs()).sum();
                row[i] - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        let n = self.rhs.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let margin = self.dominance_margin();
        if !(margin > 0.0) {
            return Err(Error::NearSingularSystem { margin });
        }
        let a = Mat::<f64>::from_fn(n, n, |i, j| self.matrix[i][j]);
        let b = Mat::<f64>::from_fn(n, 1, |i, _| self.rhs[i]);
        let x = a.partial_piv_lu().solve(&b);
        let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        for (index, &value) in out.iter().enumerate() {
            if !(value > 0.0) {
                return Err(Error::NonpositiveStrength { index, value });
            }
        }
        Ok(out)
    }

    /// Sup-norm of `A q̂ − q(z)`.
    pub fn residual(&self, strengths: &[f64]) -> f64 {
        self.matrix
            .iter()
            .zip(&self.rhs)
            .map(|(row, r)| (row.iter().zip(strengths).map(|(a, x)| a * x).sum::<f64>() - r).abs())
            .fold(0.0, f64::max)
    }
}

pub fn solve_strengths(eps: f64, green: &GreenCache, fields: &BackgroundFields) -> Result<Vec<f64>> {
    StrengthSystem::single(eps, green, fields).solve()
}

/// `green` must hold the `m` positive sources followed by the negative ones.
pub fn solve_pair_strengths(eps: f64, m: usize, green: &GreenCache, fields: &BackgroundFields) -> Result<Vec<f64>> {
    StrengthSystem::pair(eps, green, fields, m).solve()
}

/// One projected vortex of the ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub center: Point,
    /// `+1` or `−1`.
    pub sign: f64,
    pub b_hat: f64,
    pub q_center: f64,
    pub q_hat: f64,
    pub core_radius: f64,
    /// `ln(R / s)`.
    pub log_ratio: f64,
    pub robin: f64,
}

impl Vortex {
    pub fn profile_vortex<'a>(&self, delta: f64, r: f64, profile: &'a ProfileTable) -> Result<ScaledVortex<'a>> {
        ScaledVortex::new(delta, self.b_hat, self.q_hat, r, profile)
    }

    pub fn distance(&self, x: Point) -> f64 {
        (x[0] - self.center[0]).hypot(x[1] - self.center[1])
    }
}

/// Assembled `V_{δ,Z}` (or `V⁺ − V⁻`) on a grid.
#[derive(Debug, Clone)]
pub struct VortexAnsatz {
    pub vortices: Vec<Vortex>,
    pub n_plus: usize,
    pub eps: f64,
    pub delta: f64,
    pub p: f64,
    pub r_enclosing: f64,
    /// Nodal field, exactly zero off the interior nodes.
    pub field: Vec<f64>,
    pub l_mult: f64,
    pub positivity_margin: f64,
    /// Largest `|V|` found at boundary nodes before zeroing.
    pub boundary_residual: f64,
    pub dominance_margin: f64,
}

impl VortexAnsatz {
    pub fn centers_plus(&self) -> Vec<Point> {
        self.vortices[..self.n_plus].iter().map(|v| v.center).collect()
    }

    pub fn centers_minus(&self) -> Vec<Point> {
        self.vortices[self.n_plus..].iter().map(|v| v.center).collect()
    }

    pub fn strengths(&self) -> Vec<f64> {
        self.vortices.iter().map(|v| v.q_hat).collect()
    }

    pub fn core_radii(&self) -> Vec<f64> {
        self.vortices.iter().map(|v| v.core_radius).collect()
    }

    pub fn is_pair(&self) -> bool {
        self.n_plus < self.vortices.len()
    }
}

/// Strengths, core radii and Robin data for `green.sources`, the first `n_plus` of which carry positive sign.
pub fn vortex_parameters(
    n_plus: usize,
    eps: f64,
    p: f64,
    green: &GreenCache,
    fields: &BackgroundFields,
    profile: &ProfileTable,
) -> Result<(Vec<Vortex>, StrengthSystem)> {
    let (delta, _) = scale_parameters(eps, p)?;
    let r = green.r_enclosing;
    let system = StrengthSystem::pair(eps, green, fields, n_plus);
    let strengths = system.solve()?;
    let mut vortices = Vec::with_capacity(strengths.len());
    for (i, &q_hat) in strengths.iter().enumerate() {
        let z = green.sources[i];
        let b_hat = fields.depth_at(z);
        let s = ScaledVortex::new(delta, b_hat, q_hat, r, profile)?.core_radius();
        vortices.push(Vortex {
            center: z,
            sign: if i < n_plus { 1.0 } else { -1.0 },
            b_hat,
            q_center: fields.stream_at(z),
            q_hat,
            core_radius: s,
            log_ratio: (r / s).ln(),
            robin: green.robin[i],
        });
    }
    Ok((vortices, system))
}

/// Builds the ansatz for `green.sources`, the first `n_plus` of which carry positive sign.
pub fn assemble_ansatz(
    n_plus: usize,
    eps: f64,
    p: f64,
    grid: &DomainGrid,
    green: &GreenCache,
    fields: &BackgroundFields,
    profile: &ProfileTable,
) -> Result<VortexAnsatz> {
    let (delta, _) = scale_parameters(eps, p)?;
    let r = grid.r_enclosing;
    let (vortices, system) = vortex_parameters(n_plus, eps, p, green, fields, profile)?;
    let profiles = vortices
        .iter()
        .map(|v| v.profile_vortex(delta, r, profile))
        .collect::<Result<Vec<_>>>()?;

    let mut field = vec![0.0; grid.node_count()];
    let mut boundary_residual: f64 = 0.0;
    let g_fields: Vec<Vec<f64>> = (0..vortices.len()).map(|i| green.g_field(i)).collect();
    for k in 0..grid.node_count() {
        if grid.kinds[k] == NodeKind::Exterior {
            continue;
        }
        let x = grid.point(k);
        let mut v = 0.0;
        for (i, (vx, sv)) in vortices.iter().zip(&profiles).enumerate() {
            let part = sv.value(vx.distance(x)) - vx.q_hat / vx.log_ratio * g_fields[i][k];
            v += vx.sign * part;
        }
        if grid.kinds[k] == NodeKind::Interior {
            field[k] = v;
        } else {
            boundary_residual = boundary_residual.max(v.abs());
        }
    }

    let mut ansatz = VortexAnsatz {
        vortices,
        n_plus,
        eps,
        delta,
        p,
        r_enclosing: r,
        field,
        l_mult: DEFAULT_L_MULT,
        positivity_margin: f64::NEG_INFINITY,
        boundary_residual,
        dominance_margin: system.dominance_margin(),
    };
    let mut l = DEFAULT_L_MULT;
    loop {
        let margin = positivity_margin(&ansatz, fields, grid, l);
        ansatz.l_mult = l;
        ansatz.positivity_margin = margin;
        if margin < 0.0 || l >= 64.0 {
            break;
        }
        l *= 2.0;
    }
    Ok(ansatz)
}

/// Largest `(±V − q)` outside the balls `B_{L s_i}(z_i)`.
pub fn positivity_margin(ansatz: &VortexAnsatz, fields: &BackgroundFields, grid: &DomainGrid, l: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for st in &grid.stencils {
        let x = grid.point(st.node);
        if ansatz.vortices.iter().any(|v| v.distance(x) < l * v.core_radius) {
            continue;
        }
        let v = ansatz.field[st.node];
        let q = fields.q[st.node];
        worst = worst.max(v - q);
        if ansatz.is_pair() {
            worst = worst.max(-v - q);
        }
    }
    worst
}

/// Centred differences of a nodal field on the box grid; one-sided at the box edges.
pub fn box_gradient(grid: &DomainGrid, f: &[f64]) -> Vec<Point> {
    let nx = grid.nx();
    let ny = grid.ny();
    let d = |v: &[f64], i: usize, n: usize, at: &dyn Fn(usize) -> f64| -> f64 {
        if i == 0 {
            (at(1) - at(0)) / (v[1] - v[0])
        } else if i == n - 1 {
            (at(n - 1) - at(n - 2)) / (v[n - 1] - v[n - 2])
        } else {
            let hm = v[i] - v[i - 1];
            let hp = v[i + 1] - v[i];
            (hm * hm * at(i + 1) - hp * hp * at(i - 1) + (hp * hp - hm * hm) * at(i)) / (hm * hp * (hm + hp))
        }
    };
    let mut out = vec![[0.0; 2]; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let gx = d(&grid.xs, i, nx, &|ii| f[j * nx + ii]);
            let gy = d(&grid.ys, j, ny, &|jj| f[jj * nx + i]);
            out[j * nx + i] = [gx, gy];
        }
    }
    out
}

/// The residual `l_δ` of the ansatz together with its norms.
#[derive(Debug, Clone)]
pub struct AnsatzResidual {
    pub field: Vec<f64>,
    pub norm_p: f64,
    pub norm_sup: f64,
    /// Sup-norm of the `δ² ∇(1/b)·∇V` part alone.
    pub gradient_sup: f64,
}

pub fn residual_l_delta(
    ansatz: &VortexAnsatz,
    fields: &BackgroundFields,
    grid: &DomainGrid,
    profile: &ProfileTable,
) -> Result<AnsatzResidual> {
    let p = ansatz.p;
    let profiles = ansatz
        .vortices
        .iter()
        .map(|v| v.profile_vortex(ansatz.delta, ansatz.r_enclosing, profile))
        .collect::<Result<Vec<_>>>()?;
    let inv_b = fields.inv_depth();
    let constant_depth = inv_b.iter().all(|v| *v == inv_b[0]);
    let (grad_v, grad_ib) = if constant_depth {
        (Vec::new(), Vec::new())
    } else {
        (box_gradient(grid, &ansatz.field), box_gradient(grid, &inv_b))
    };
    let mut field = vec![0.0; grid.node_count()];
    let mut gradient_sup: f64 = 0.0;
    for st in &grid.stencils {
        let k = st.node;
        let x = grid.point(k);
        let b = fields.b[k];
        let q = fields.q[k];
        let v = ansatz.field[k];
        let mut l = b * (v - q).max(0.0).powf(p);
        if ansatz.is_pair() {
            l -= b * (-v - q).max(0.0).powf(p);
        }
        for (vx, sv) in ansatz.vortices.iter().zip(&profiles) {
            let r = vx.distance(x);
            if r < vx.core_radius {
                l -= vx.sign * vx.b_hat * vx.b_hat / b * sv.excess(r).powf(p);
            }
        }
        if !constant_depth {
            let g = ansatz.delta * ansatz.delta * (grad_ib[k][0] * grad_v[k][0] + grad_ib[k][1] * grad_v[k][1]);
            gradient_sup = gradient_sup.max(g.abs());
            l += g;
        }
        field[k] = l;
    }
    let norm_p = grid.integrate(&field.iter().map(|v| v.abs().powf(p)).collect::<Vec<_>>()).powf(1.0 / p);
    let norm_sup = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(AnsatzResidual { field, norm_p, norm_sup, gradient_sup })
}
