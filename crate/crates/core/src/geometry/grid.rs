use serde::{Deserialize, Serialize};

use super::shape::{Point, Shape};
use crate::error::{Error, Result};
use crate::sparse::TripletMatrix;

/// Minimum number of interior nodes across any diameter.
pub const MIN_NODES_ACROSS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

/// Local refinement around a point: spacing `spacing` within `plateau` of `center`,
/// then growing linearly with slope `grading` up to the base spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Refinement {
    pub center: Point,
    pub spacing: f64,
    #[serde(default)]
    pub plateau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub spacing: f64,
    #[serde(default)]
    pub refinements: Vec<Refinement>,
    #[serde(default = "default_grading")]
    pub grading: f64,
}

fn default_grading() -> f64 {
    0.15
}

impl GridSpec {
    pub fn uniform(spacing: f64) -> Self {
        Self { spacing, refinements: Vec::new(), grading: default_grading() }
    }

    pub fn refined(mut self, center: Point, spacing: f64, plateau: f64) -> Self {
        self.refinements.push(Refinement { center, spacing, plateau });
        self
    }
}

/// Other end of a stencil arm: another unknown, or a point where Dirichlet data is imposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neighbor {
    Unknown(usize),
    Dirichlet { node: Option<usize>, point: Point },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub len: f64,
    /// Shortley–Weller coefficient `1 / (len · (h₊ + h₋)/2)`.
    pub weight: f64,
    pub neighbor: Neighbor,
}

/// Finite-volume row for one unknown; arms ordered E, W, N, S.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub node: usize,
    pub arms: [Arm; 4],
    pub volume: f64,
}

/// Tensor-product rectilinear grid over the bounding box of a shape, with cut cells on curved boundaries.
#[derive(Debug, Clone)]
pub struct DomainGrid {
    pub shape: Shape,
    pub spec: GridSpec,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub kinds: Vec<NodeKind>,
    /// Area of each node's dual cell clipped to the domain.
    pub quad_weights: Vec<f64>,
    pub r_enclosing: f64,
    pub stencils: Vec<Stencil>,
    unknown_of: Vec<usize>,
}

const NONE: usize = usize::MAX;

pub fn build_grid(shape: Shape, spacing: f64) -> Result<DomainGrid> {
    build_grid_with(shape, &GridSpec::uniform(spacing))
}

pub fn build_grid_with(shape: Shape, spec: &GridSpec) -> Result<DomainGrid> {
    if !(spec.spacing > 0.0) || spec.refinements.iter().any(|r| !(r.spacing > 0.0)) {
        return Err(Error::TooCoarse(format!("nonpositive spacing {}", spec.spacing)));
    }
    let (lo, hi) = shape.bounding_box();
    let marks_x: Vec<_> = spec.refinements.iter().map(|r| (r.center[0], r.spacing, r.plateau)).collect();
    let marks_y: Vec<_> = spec.refinements.iter().map(|r| (r.center[1], r.spacing, r.plateau)).collect();
    let xs = axis_nodes(lo[0], hi[0], spec.spacing, &marks_x, spec.grading);
    let ys = axis_nodes(lo[1], hi[1], spec.spacing, &marks_y, spec.grading);
    let nx = xs.len();
    let ny = ys.len();

    let mut kinds = vec![NodeKind::Exterior; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            kinds[k] = match shape {
                Shape::Rectangle { .. } => {
                    if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                        NodeKind::Boundary
                    } else {
                        NodeKind::Interior
                    }
                }
                Shape::Disk { .. } => {
                    let h = local_min_spacing(&xs, i).min(local_min_spacing(&ys, j));
                    let d = shape.distance_to_boundary([xs[i], ys[j]]);
                    if d > 1e-3 * h {
                        NodeKind::Interior
                    } else if d >= -1e-3 * h {
                        NodeKind::Boundary
                    } else {
                        NodeKind::Exterior
                    }
                }
            };
        }
    }

    let mut unknown_of = vec![NONE; nx * ny];
    let mut count = 0;
    for (k, kind) in kinds.iter().enumerate() {
        if *kind == NodeKind::Interior {
            unknown_of[k] = count;
            count += 1;
        }
    }

    let across_x = kinds[(ny / 2) * nx..(ny / 2 + 1) * nx]
        .iter()
        .filter(|k| **k == NodeKind::Interior)
        .count();
    let across_y = (0..ny).filter(|&j| kinds[j * nx + nx / 2] == NodeKind::Interior).count();
    if across_x.min(across_y) < MIN_NODES_ACROSS {
        return Err(Error::TooCoarse(format!(
            "{} interior nodes across the domain, need at least {MIN_NODES_ACROSS}",
            across_x.min(across_y)
        )));
    }

    let mut stencils = Vec::with_capacity(count);
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if kinds[k] != NodeKind::Interior {
                continue;
            }
            let p = [xs[i], ys[j]];
            // (axis, dir, neighbour index) for E, W, N, S
            let dirs = [(0usize, 1.0, k + 1, xs[i + 1] - xs[i]), (0, -1.0, k - 1, xs[i] - xs[i - 1]),
                (1, 1.0, k + nx, ys[j + 1] - ys[j]), (1, -1.0, k - nx, ys[j] - ys[j - 1])];
            let mut lens = [0.0; 4];
            let mut neighbors = [Neighbor::Unknown(0); 4];
            for (a, &(axis, dir, nb, full)) in dirs.iter().enumerate() {
                let (len, neighbor) = match kinds[nb] {
                    NodeKind::Interior => (full, Neighbor::Unknown(unknown_of[nb])),
                    NodeKind::Boundary => (full, Neighbor::Dirichlet { node: Some(nb), point: [xs[nb % nx], ys[nb / nx]] }),
                    NodeKind::Exterior => {
                        let t = shape.boundary_crossing(p, axis, dir, full).unwrap_or(full);
                        let mut q = p;
                        q[axis] += dir * t;
                        (t, Neighbor::Dirichlet { node: None, point: q })
                    }
                };
                lens[a] = len;
                neighbors[a] = neighbor;
            }
            let hx = 0.5 * (lens[0] + lens[1]);
            let hy = 0.5 * (lens[2] + lens[3]);
            let mk = |a: usize, h: f64| Arm { len: lens[a], weight: 1.0 / (lens[a] * h), neighbor: neighbors[a] };
            stencils.push(Stencil {
                node: k,
                arms: [mk(0, hx), mk(1, hx), mk(2, hy), mk(3, hy)],
                volume: hx * hy,
            });
        }
    }

    let mid = |v: &[f64], i: usize| -> (f64, f64) {
        let a = if i == 0 { v[0] } else { 0.5 * (v[i - 1] + v[i]) };
        let b = if i + 1 == v.len() { v[i] } else { 0.5 * (v[i] + v[i + 1]) };
        (a, b)
    };
    let mut quad_weights = vec![0.0; nx * ny];
    for j in 0..ny {
        let (y0, y1) = mid(&ys, j);
        for i in 0..nx {
            let (x0, x1) = mid(&xs, i);
            quad_weights[j * nx + i] = shape.clipped_area(x0, x1, y0, y1);
        }
    }

    Ok(DomainGrid {
        shape,
        spec: spec.clone(),
        xs,
        ys,
        kinds,
        quad_weights,
        r_enclosing: 2.0 * shape.diameter(),
        stencils,
        unknown_of,
    })
}

fn local_min_spacing(v: &[f64], i: usize) -> f64 {
    let mut h = f64::INFINITY;
    if i > 0 {
        h = h.min(v[i] - v[i - 1]);
    }
    if i + 1 < v.len() {
        h = h.min(v[i + 1] - v[i]);
    }
    h
}

/// Nodes on `[lo, hi]` equidistributing the target spacing; mirror-symmetric when the marks are.
fn axis_nodes(lo: f64, hi: f64, base: f64, marks: &[(f64, f64, f64)], grading: f64) -> Vec<f64> {
    let len = hi - lo;
    let mut nodes = if marks.is_empty() {
        let n = ((len / base).round() as usize).max(1);
        (0..=n).map(|i| lo + len * i as f64 / n as f64).collect::<Vec<_>>()
    } else {
        let target = |x: f64| {
            marks.iter().fold(base, |h, &(c, fine, plateau)| {
                h.min(fine + grading * ((x - c).abs() - plateau).max(0.0))
            })
        };
        let finest = marks.iter().map(|m| m.1).fold(base, f64::min);
        let samples = ((40.0 * len / finest) as usize).clamp(4000, 4_000_000);
        let dx = len / samples as f64;
        let mut cumulative = Vec::with_capacity(samples + 1);
        cumulative.push(0.0);
        let mut prev = 1.0 / target(lo);
        for s in 1..=samples {
            let cur = 1.0 / target(lo + dx * s as f64);
            let last = *cumulative.last().unwrap();
            cumulative.push(last + 0.5 * dx * (prev + cur));
            prev = cur;
        }
        let total = cumulative[samples];
        let n = (total.ceil() as usize).max(1);
        let mut out = Vec::with_capacity(n + 1);
        out.push(lo);
        let mut s = 0;
        for i in 1..n {
            let phi = total * i as f64 / n as f64;
            while cumulative[s + 1] < phi {
                s += 1;
            }
            let t = (phi - cumulative[s]) / (cumulative[s + 1] - cumulative[s]);
            out.push(lo + dx * (s as f64 + t));
        }
        out.push(hi);
        out
    };
    let symmetric = marks.iter().all(|&(c, fine, plateau)| {
        marks.iter().any(|&(c2, f2, p2)| {
            (c + c2 - lo - hi).abs() <= 1e-12 * len && fine == f2 && plateau == p2
        })
    });
    if symmetric {
        let n = nodes.len() - 1;
        let sum = lo + hi;
        for i in 0..=n / 2 {
            let mirrored = if i == 0 { hi } else { sum - nodes[i] };
            nodes[n - i] = mirrored;
        }
        if n % 2 == 0 {
            nodes[n / 2] = 0.5 * sum;
        }
    }
    nodes
}

impl DomainGrid {
    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn unknown_count(&self) -> usize {
        self.stencils.len()
    }

    pub fn point(&self, k: usize) -> Point {
        let nx = self.nx();
        [self.xs[k % nx], self.ys[k / nx]]
    }

    pub fn unknown_of(&self, k: usize) -> Option<usize> {
        let u = self.unknown_of[k];
        (u != NONE).then_some(u)
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        let m = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        m(&self.xs).min(m(&self.ys))
    }

    /// Cell `(i, j)` with `xs[i] ≤ x ≤ xs[i+1]`, clamped to the box.
    pub fn locate(&self, p: Point) -> (usize, usize) {
        let find = |v: &[f64], x: f64| {
            let i = v.partition_point(|&t| t <= x);
            i.saturating_sub(1).min(v.len() - 2)
        };
        (find(&self.xs, p[0]), find(&self.ys, p[1]))
    }

    /// Larger side of the cell containing `p`.
    pub fn local_spacing(&self, p: Point) -> f64 {
        let (i, j) = self.locate(p);
        (self.xs[i + 1] - self.xs[i]).max(self.ys[j + 1] - self.ys[j])
    }

    /// Bilinear interpolation of a nodal field.
    pub fn interpolate(&self, field: &[f64], p: Point) -> f64 {
        let nx = self.nx();
        let (i, j) = self.locate(p);
        let tx = ((p[0] - self.xs[i]) / (self.xs[i + 1] - self.xs[i])).clamp(0.0, 1.0);
        let ty = ((p[1] - self.ys[j]) / (self.ys[j + 1] - self.ys[j])).clamp(0.0, 1.0);
        let k = j * nx + i;
        let f00 = field[k];
        let f10 = field[k + 1];
        let f01 = field[k + nx];
        let f11 = field[k + nx + 1];
        (1.0 - ty) * ((1.0 - tx) * f00 + tx * f10) + ty * ((1.0 - tx) * f01 + tx * f11)
    }

    /// Integral of a nodal field against the clipped dual-cell weights.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().zip(&self.quad_weights).map(|(f, w)| f * w).sum()
    }

    pub fn total_area(&self) -> f64 {
        self.quad_weights.iter().sum()
    }

    /// Face coefficients per stencil arm: harmonic means of the nodal coefficient `a`.
    pub fn face_coefficients(&self, a: &[f64]) -> Vec<[f64; 4]> {
        self.stencils
            .iter()
            .map(|st| {
                let ap = a[st.node];
                let mut out = [ap; 4];
                for (o, arm) in out.iter_mut().zip(&st.arms) {
                    let other = match arm.neighbor {
                        Neighbor::Unknown(u) => Some(self.stencils[u].node),
                        Neighbor::Dirichlet { node, .. } => node,
                    };
                    if let Some(k) = other {
                        *o = harmonic(ap, a[k]);
                    }
                }
                out
            })
            .collect()
    }

    /// `−div(a ∇w)` at every unknown, with `w` given on all nodes and cut-arm values from `dirichlet`.
    pub fn apply_diffusion(
        &self,
        faces: &[[f64; 4]],
        w: &[f64],
        dirichlet: &dyn Fn(Point) -> f64,
    ) -> Vec<f64> {
        self.stencils
            .iter()
            .zip(faces)
            .map(|(st, af)| {
                let wp = w[st.node];
                let mut acc = 0.0;
                for (arm, a) in st.arms.iter().zip(af) {
                    let wn = match arm.neighbor {
                        Neighbor::Unknown(u) => w[self.stencils[u].node],
                        Neighbor::Dirichlet { node: Some(k), .. } => w[k],
                        Neighbor::Dirichlet { node: None, point } => dirichlet(point),
                    };
                    acc += a * arm.weight * (wp - wn);
                }
                acc
            })
            .collect()
    }

    /// Matrix of `scale · (−div(a ∇·))` on the unknowns plus an optional diagonal shift.
    pub fn diffusion_matrix(&self, faces: &[[f64; 4]], scale: f64, diagonal: Option<&[f64]>) -> TripletMatrix {
        let mut t = TripletMatrix::new(self.unknown_count());
        for (row, (st, af)) in self.stencils.iter().zip(faces).enumerate() {
            let mut diag = 0.0;
            for (arm, a) in st.arms.iter().zip(af) {
                let c = scale * a * arm.weight;
                diag += c;
                if let Neighbor::Unknown(u) = arm.neighbor {
                    t.push(row, u, -c);
                }
            }
            if let Some(d) = diagonal {
                diag += d[row];
            }
            t.push(row, row, diag);
        }
        t
    }

    /// Right-hand side contributed by Dirichlet data through the boundary arms.
    pub fn dirichlet_rhs(&self, faces: &[[f64; 4]], data: &dyn Fn(Point) -> f64) -> Vec<f64> {
        self.stencils
            .iter()
            .zip(faces)
            .map(|(st, af)| {
                st.arms
                    .iter()
                    .zip(af)
                    .filter_map(|(arm, a)| match arm.neighbor {
                        Neighbor::Dirichlet { point, .. } => Some(a * arm.weight * data(point)),
                        Neighbor::Unknown(_) => None,
                    })
                    .sum()
            })
            .collect()
    }

    /// Nodal field from values at the unknowns; other nodes filled by `fill`.
    pub fn scatter(&self, unknowns: &[f64], fill: &dyn Fn(Point) -> f64) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.node_count()).map(|k| {
            if self.kinds[k] == NodeKind::Interior { 0.0 } else { fill(self.point(k)) }
        }).collect();
        for (st, v) in self.stencils.iter().zip(unknowns) {
            out[st.node] = *v;
        }
        out
    }

    pub fn gather(&self, field: &[f64]) -> Vec<f64> {
        self.stencils.iter().map(|st| field[st.node]).collect()
    }

    /// Grid nodes as `(x, y)`, row-major with x fastest.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.node_count()).map(|k| self.point(k))
    }
}

pub fn harmonic(a: f64, b: f64) -> f64 {
    if a == b {
        a
    } else {
        2.0 * a * b / (a + b)
    }
}
