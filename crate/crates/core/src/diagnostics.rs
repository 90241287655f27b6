//! Physical read-out of solved states: vortex cores, circulation, flow fields and ladder trends.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ansatz::box_gradient;
use crate::energy::{energy_quadrature, expansion_scale, EnergyReport};
use crate::error::{Error, Result};
use crate::geometry::{BackgroundFields, DomainGrid, NodeKind, Point};
use crate::solver::{Operator, Rung, SolvedState};

pub const CURL_CONVENTION: &str = "curl psi = (d psi/dx2, -d psi/dx1)";

/// One connected component of `{w > q}` (sign `+1`) or `{−w > q}` (sign `−1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreComponent {
    pub sign: f64,
    #[serde(skip)]
    pub nodes: Vec<usize>,
    pub node_count: usize,
    pub centroid: Point,
    pub area: f64,
    pub diameter: f64,
    /// Smallest `r` with the component inside `B(centroid, r)`.
    pub containment_radius: f64,
    pub containment_over_eps: f64,
    pub circulation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexCoreReport {
    pub eps: f64,
    pub components: Vec<CoreComponent>,
    pub count: usize,
    pub count_plus: usize,
    pub count_minus: usize,
}

impl VortexCoreReport {
    /// Component of the given sign whose centroid is closest to `z`.
    pub fn nearest(&self, z: Point, sign: f64) -> Option<&CoreComponent> {
        self.components
            .iter()
            .filter(|c| c.sign == sign)
            .min_by(|a, b| dist(a.centroid, z).total_cmp(&dist(b.centroid, z)))
    }

    pub fn max_diameter_over_eps(&self) -> f64 {
        self.components.iter().map(|c| c.diameter / self.eps).fold(0.0, f64::max)
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `b |ln ε|^p / ε² · (w−q)₊^p`, with the negative family subtracted in pair mode.
pub fn vorticity(state: &SolvedState, fields: &BackgroundFields) -> Vec<f64> {
    let l = -state.eps.ln();
    let scale = l.powf(state.p) / (state.eps * state.eps);
    state
        .w
        .iter()
        .zip(fields.b.iter().zip(&fields.q))
        .map(|(&w, (&b, &q))| {
            let mut v = (w - q).max(0.0).powf(state.p);
            if state.pair_mode {
                v -= (-w - q).max(0.0).powf(state.p);
            }
            scale * b * v
        })
        .collect()
}

pub fn extract_cores(state: &SolvedState, fields: &BackgroundFields, grid: &DomainGrid) -> Result<VortexCoreReport> {
    let nx = grid.nx();
    let ny = grid.ny();
    let omega = vorticity(state, fields);
    let label_of = |k: usize| -> i8 {
        if grid.kinds[k] != NodeKind::Interior {
            return 0;
        }
        let (w, q) = (state.w[k], fields.q[k]);
        if w > q {
            1
        } else if state.pair_mode && -w > q {
            -1
        } else {
            0
        }
    };
    let labels: Vec<i8> = (0..grid.node_count()).map(label_of).collect();
    let mut seen = vec![false; labels.len()];
    let mut components = Vec::new();
    for start in 0..labels.len() {
        if labels[start] == 0 || seen[start] {
            continue;
        }
        let sign = labels[start];
        let mut nodes = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(k) = queue.pop_front() {
            nodes.push(k);
            let (i, j) = (k % nx, k / nx);
            let mut push = |kk: usize| {
                if !seen[kk] && labels[kk] == sign {
                    seen[kk] = true;
                    queue.push_back(kk);
                }
            };
            if i > 0 {
                push(k - 1);
            }
            if i + 1 < nx {
                push(k + 1);
            }
            if j > 0 {
                push(k - nx);
            }
            if j + 1 < ny {
                push(k + nx);
            }
        }
        nodes.sort_unstable();
        let area: f64 = nodes.iter().map(|&k| grid.quad_weights[k]).sum();
        let mut c = [0.0, 0.0];
        for &k in &nodes {
            let p = grid.point(k);
            c[0] += grid.quad_weights[k] * p[0];
            c[1] += grid.quad_weights[k] * p[1];
        }
        let centroid = [c[0] / area, c[1] / area];
        let pts: Vec<Point> = nodes.iter().map(|&k| grid.point(k)).collect();
        let mut diameter = 0.0f64;
        for (a, &pa) in pts.iter().enumerate() {
            for &pb in &pts[a + 1..] {
                diameter = diameter.max(dist(pa, pb));
            }
        }
        let containment_radius = pts.iter().map(|&p| dist(p, centroid)).fold(0.0, f64::max);
        let circulation = nodes.iter().map(|&k| grid.quad_weights[k] * omega[k]).sum();
        components.push(CoreComponent {
            sign: sign as f64,
            node_count: nodes.len(),
            nodes,
            centroid,
            area,
            diameter,
            containment_radius,
            containment_over_eps: containment_radius / state.eps,
            circulation,
        });
    }
    if components.is_empty() {
        return Err(Error::EmptyCore);
    }
    let count_plus = components.iter().filter(|c| c.sign > 0.0).count();
    Ok(VortexCoreReport {
        eps: state.eps,
        count: components.len(),
        count_minus: components.len() - count_plus,
        count_plus,
        components,
    })
}

/// Signed total and per-family circulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circulation {
    pub total: f64,
    pub plus: f64,
    pub minus: f64,
}

/// Integrates the same cell-averaged source the discrete equation uses, so the total
/// equals the discrete boundary flux.
pub fn circulation(state: &SolvedState, fields: &BackgroundFields, grid: &DomainGrid) -> Circulation {
    let l = -state.eps.ln();
    let scale = l.powf(state.p) / (state.eps * state.eps);
    let op = Operator::new(grid, fields, state.delta, state.p, false);
    let x = grid.gather(&state.w);
    let integrate = |x: &[f64]| -> f64 {
        op.source(x).iter().zip(&grid.stencils).map(|(s, st)| grid.quad_weights[st.node] * s).sum::<f64>() * scale
    };
    let plus = integrate(&x);
    let minus = if state.pair_mode {
        -integrate(&x.iter().map(|v| -v).collect::<Vec<_>>())
    } else {
        0.0
    };
    Circulation { total: plus + minus, plus, minus }
}

/// Limit circulation `Σ sign · 2π q(z)/b(z)`.
pub fn circulation_limit(fields: &BackgroundFields, centers: &[Point], signs: &[f64]) -> f64 {
    centers
        .iter()
        .zip(signs)
        .map(|(&z, s)| s * 2.0 * PI * fields.stream_at(z) / fields.depth_at(z))
        .sum()
}

/// Velocity, vorticity and height of the stationary flow with structural checks.
#[derive(Debug, Clone)]
pub struct FlowFields {
    /// `u = |ln ε| w`.
    pub u: Vec<f64>,
    /// `u − q |ln ε|`.
    pub psi: Vec<f64>,
    pub vorticity: Vec<f64>,
    pub velocity: Vec<Point>,
    pub height: Vec<f64>,
    pub circulation: Circulation,
    /// `sup |div(b v)|` over interior nodes.
    pub divergence_sup: f64,
    /// `divergence_sup` divided by `sup|b v| / h_min`.
    pub divergence_relative: f64,
    /// `sup |(v·∇)v + ∇h|` away from free boundaries and the domain edge.
    pub stationarity_sup: f64,
    pub stationarity_relative: f64,
    pub stationarity_nodes: usize,
    /// Largest tangential derivative of `ψ − |ln ε| ψ₀` along the boundary, relative to `sup|b v|`.
    pub flux_error: f64,
    pub curl_convention: &'static str,
}

pub fn reconstruct_flow(state: &SolvedState, fields: &BackgroundFields, grid: &DomainGrid) -> FlowFields {
    let eps = state.eps;
    let l = -eps.ln();
    let p = state.p;
    let u: Vec<f64> = state.w.iter().map(|w| l * w).collect();
    let psi: Vec<f64> = u.iter().zip(&fields.q).map(|(u, q)| u - l * q).collect();
    let grad_psi = box_gradient(grid, &psi);
    let bv: Vec<Point> = grad_psi.iter().map(|g| [g[1], -g[0]]).collect();
    let velocity: Vec<Point> = bv.iter().zip(&fields.b).map(|(f, b)| [f[0] / b, f[1] / b]).collect();
    // F(ψ) with f(s) = s₊^p/ε² − (−s − 2q_ε)₊^p/ε²
    let e2 = eps * eps;
    let height: Vec<f64> = (0..grid.node_count())
        .map(|k| {
            let qe = l * fields.q[k];
            let mut f = (u[k] - qe).max(0.0).powf(p + 1.0);
            if state.pair_mode {
                f += (-u[k] - qe).max(0.0).powf(p + 1.0);
            }
            let v = velocity[k];
            -f / ((p + 1.0) * e2) - 0.5 * (v[0] * v[0] + v[1] * v[1])
        })
        .collect();

    let interior: Vec<usize> = grid.stencils.iter().map(|s| s.node).collect();
    let d_bv1 = box_gradient(grid, &bv.iter().map(|f| f[0]).collect::<Vec<_>>());
    let d_bv2 = box_gradient(grid, &bv.iter().map(|f| f[1]).collect::<Vec<_>>());
    let divergence_sup = interior.iter().map(|&k| (d_bv1[k][0] + d_bv2[k][1]).abs()).fold(0.0, f64::max);
    let bv_sup = interior.iter().map(|&k| bv[k][0].hypot(bv[k][1])).fold(0.0, f64::max);
    let divergence_relative = if bv_sup > 0.0 { divergence_sup * grid.min_spacing() / bv_sup } else { divergence_sup };

    let d_v1 = box_gradient(grid, &velocity.iter().map(|v| v[0]).collect::<Vec<_>>());
    let d_v2 = box_gradient(grid, &velocity.iter().map(|v| v[1]).collect::<Vec<_>>());
    let d_h = box_gradient(grid, &height);
    let region = |k: usize| -> i8 {
        let (w, q) = (state.w[k], fields.q[k]);
        if w > q {
            1
        } else if state.pair_mode && -w > q {
            -1
        } else {
            0
        }
    };
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    let away = |k: usize| -> bool {
        let (i, j) = ((k as isize) % nx, (k as isize) / nx);
        let r0 = region(k);
        for dj in -2..=2 {
            for di in -2..=2 {
                let (ii, jj) = (i + di, j + dj);
                if ii < 0 || jj < 0 || ii >= nx || jj >= ny {
                    return false;
                }
                let kk = (jj * nx + ii) as usize;
                if grid.kinds[kk] == NodeKind::Exterior || region(kk) != r0 {
                    return false;
                }
            }
        }
        true
    };
    let mut stationarity_sup = 0.0f64;
    let mut scale = 0.0f64;
    let mut stationarity_nodes = 0;
    for &k in &interior {
        if !away(k) {
            continue;
        }
        stationarity_nodes += 1;
        let v = velocity[k];
        let adv = [v[0] * d_v1[k][0] + v[1] * d_v1[k][1], v[0] * d_v2[k][0] + v[1] * d_v2[k][1]];
        let r = [adv[0] + d_h[k][0], adv[1] + d_h[k][1]];
        stationarity_sup = stationarity_sup.max(r[0].hypot(r[1]));
        scale = scale.max(adv[0].hypot(adv[1])).max(d_h[k][0].hypot(d_h[k][1]));
    }
    let stationarity_relative = if scale > 0.0 { stationarity_sup / scale } else { stationarity_sup };

    // ψ − |ln ε| ψ₀ = |ln ε| w vanishes on ∂Ω, so its tangential derivative is the flux mismatch
    let trace = grid.shape.boundary_trace(grid.min_spacing().max(grid.spacing() / 4.0));
    let mut flux = 0.0f64;
    for (a, b) in trace.iter().zip(trace.iter().cycle().skip(1)) {
        let ds = dist(*a, *b);
        let dw = grid.interpolate(&state.w, *b) - grid.interpolate(&state.w, *a);
        flux = flux.max(l * dw.abs() / ds);
    }
    let flux_error = if bv_sup > 0.0 { flux / bv_sup } else { flux };

    FlowFields {
        circulation: circulation(state, fields, grid),
        vorticity: vorticity(state, fields),
        u,
        psi,
        velocity,
        height,
        divergence_sup,
        divergence_relative,
        stationarity_sup,
        stationarity_relative,
        stationarity_nodes,
        flux_error,
        curl_convention: CURL_CONVENTION,
    }
}

/// One ε row of the trend table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub eps: f64,
    pub delta: f64,
    pub circulation: f64,
    /// `|Γ − Γ₀| / Σ|Γ₀,i|`.
    pub circ_error: f64,
    pub core_count: usize,
    pub core_diam_over_eps: f64,
    /// Largest distance from a predicted point to the nearest core centroid of its sign.
    pub centroid_dist: f64,
    pub correction_sup: f64,
    /// `|I(V) − K| / (δ² ln|ln ε| / |ln ε|²)`.
    pub energy_gap: f64,
}

/// Least-squares slope of `ln y` against `ln |ln ε|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub column: String,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTable {
    pub rows: Vec<TrendRow>,
    pub fits: Vec<TrendFit>,
}

pub const TREND_COLUMNS: [&str; 9] = [
    "eps",
    "delta",
    "circulation",
    "circ_error",
    "core_count",
    "core_diam_over_eps",
    "centroid_dist",
    "correction_sup",
    "energy_gap",
];

/// Trend row for one solved rung; `targets` are the predicted limit points (positive family first).
pub fn trend_row(rung: &Rung, targets: &[Point]) -> Result<TrendRow> {
    let state = rung.state.as_ref().ok_or_else(|| Error::Invariant("rung has no solved state".into()))?;
    let cores = extract_cores(state, &rung.fields, &rung.grid)?;
    let circ = circulation(state, &rung.fields, &rung.grid);
    let signs: Vec<f64> = rung.ansatz.vortices.iter().map(|v| v.sign).collect();
    // Pairs cancel in the total, so compare each family with its own limit.
    let family_error = |s: f64, value: f64| -> Option<f64> {
        let z: Vec<Point> = targets.iter().zip(&signs).filter(|(_, &t)| t == s).map(|(&z, _)| z).collect();
        if z.is_empty() {
            return None;
        }
        let limit = circulation_limit(&rung.fields, &z, &vec![s; z.len()]);
        Some((value - limit).abs() / limit.abs())
    };
    let circ_error = if signs.iter().any(|&s| s < 0.0) {
        [family_error(1.0, circ.plus), family_error(-1.0, circ.minus)].into_iter().flatten().fold(0.0, f64::max)
    } else {
        let limit = circulation_limit(&rung.fields, targets, &signs);
        (circ.total - limit).abs() / limit.abs()
    };
    let centroid_dist = targets
        .iter()
        .zip(&signs)
        .map(|(&z, &s)| cores.nearest(z, s).map_or(f64::INFINITY, |c| dist(c.centroid, z)))
        .fold(0.0, f64::max);
    let i_v = energy_quadrature(&rung.ansatz.field, &rung.fields, state.delta, state.p, &rung.grid, state.pair_mode);
    let k = EnergyReport::from_vortices(rung.ansatz.vortices.clone(), state.eps, state.delta, &rung.green).k_asymptotic;
    Ok(TrendRow {
        eps: state.eps,
        delta: state.delta,
        circulation: circ.total,
        circ_error,
        core_count: cores.count,
        core_diam_over_eps: cores.max_diameter_over_eps(),
        centroid_dist,
        correction_sup: state.correction_sup,
        energy_gap: (i_v - k).abs() / expansion_scale(state.eps, state.delta),
    })
}

pub fn trend_table(rungs: &[Rung], targets: &[Point]) -> Result<TrendTable> {
    let rows = rungs.iter().map(|r| trend_row(r, targets)).collect::<Result<Vec<_>>>()?;
    Ok(TrendTable::from_rows(rows))
}

impl TrendTable {
    pub fn from_rows(rows: Vec<TrendRow>) -> Self {
        let mut fits = Vec::new();
        if rows.len() >= 2 {
            let x: Vec<f64> = rows.iter().map(|r| (-r.eps.ln()).ln()).collect();
            let columns: [(&str, fn(&TrendRow) -> f64); 4] = [
                ("circ_error", |r| r.circ_error),
                ("centroid_dist", |r| r.centroid_dist),
                ("correction_sup", |r| r.correction_sup),
                ("energy_gap", |r| r.energy_gap),
            ];
            for (name, get) in columns {
                let y: Vec<f64> = rows.iter().map(|r| get(r).ln()).collect();
                if let Some((slope, intercept)) = fit_line(&x, &y) {
                    fits.push(TrendFit { column: name.to_string(), slope, intercept });
                }
            }
        }
        Self { rows, fits }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ordinary least squares `y = a x + b`; `None` when any value is non-finite or `x` is constant.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 2 || x.iter().chain(y).any(|v| !v.is_finite()) {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Nodal field dump with columns `x, y, w, excess`, interior and boundary nodes only.
pub fn write_field_csv<W: Write>(out: W, grid: &DomainGrid, state: &SolvedState, fields: &BackgroundFields) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "w", "excess"])?;
    for k in 0..grid.node_count() {
        if grid.kinds[k] == NodeKind::Exterior {
            continue;
        }
        let p = grid.point(k);
        let excess = (state.w[k] - fields.q[k]).max(0.0);
        w.write_record([p[0], p[1], state.w[k], excess].map(|v| format!("{v:.17e}")))
            ?;
    }
    w.flush()?;
    Ok(())
}

/// Velocity and height dump with columns `x, y, u, vorticity, v1, v2, height`.
pub fn write_flow_csv<W: Write>(out: W, grid: &DomainGrid, flow: &FlowFields) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "u", "vorticity", "v1", "v2", "height"])?;
    for k in 0..grid.node_count() {
        if grid.kinds[k] == NodeKind::Exterior {
            continue;
        }
        let p = grid.point(k);
        let row = [p[0], p[1], flow.u[k], flow.vorticity[k], flow.velocity[k][0], flow.velocity[k][1], flow.height[k]];
        w.write_record(row.map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}
