use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

/// Bounded planar domain: a disk or an axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Disk { center: Point, radius: f64 },
    Rectangle { min: Point, max: Point },
}

impl Shape {
    pub fn unit_disk() -> Self {
        Shape::Disk { center: [0.0, 0.0], radius: 1.0 }
    }

    pub fn unit_square() -> Self {
        Shape::Rectangle { min: [0.0, 0.0], max: [1.0, 1.0] }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            Shape::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Shape::Rectangle { min, max } => (min, max),
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => 2.0 * radius,
            Shape::Rectangle { min, max } => (max[0] - min[0]).hypot(max[1] - min[1]),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::Rectangle { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
        }
    }

    /// Positive inside, zero on the boundary, negative outside.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        match *self {
            Shape::Disk { center, radius } => radius - (p[0] - center[0]).hypot(p[1] - center[1]),
            Shape::Rectangle { min, max } => {
                let inside = (p[0] - min[0])
                    .min(max[0] - p[0])
                    .min(p[1] - min[1])
                    .min(max[1] - p[1]);
                if inside >= 0.0 {
                    inside
                } else {
                    let dx = (min[0] - p[0]).max(p[0] - max[0]).max(0.0);
                    let dy = (min[1] - p[1]).max(p[1] - max[1]).max(0.0);
                    -dx.hypot(dy)
                }
            }
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.distance_to_boundary(p) > 0.0
    }

    /// Closest boundary point.
    pub fn project_to_boundary(&self, p: Point) -> Point {
        match *self {
            Shape::Disk { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let r = dx.hypot(dy);
                if r == 0.0 {
                    [center[0] + radius, center[1]]
                } else {
                    [center[0] + radius * dx / r, center[1] + radius * dy / r]
                }
            }
            Shape::Rectangle { min, max } => {
                let c = [p[0].clamp(min[0], max[0]), p[1].clamp(min[1], max[1])];
                let gaps = [c[0] - min[0], max[0] - c[0], c[1] - min[1], max[1] - c[1]];
                let k = (0..4)
                    .min_by(|&a, &b| gaps[a].total_cmp(&gaps[b]))
                    .unwrap_or(0);
                match k {
                    0 => [min[0], c[1]],
                    1 => [max[0], c[1]],
                    2 => [c[0], min[1]],
                    _ => [c[0], max[1]],
                }
            }
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, p: Point) -> Point {
        match *self {
            Shape::Disk { center, .. } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let r = dx.hypot(dy).max(f64::MIN_POSITIVE);
                [dx / r, dy / r]
            }
            Shape::Rectangle { min, max } => {
                let gaps = [p[0] - min[0], max[0] - p[0], p[1] - min[1], max[1] - p[1]];
                let k = (0..4)
                    .min_by(|&a, &b| gaps[a].abs().total_cmp(&gaps[b].abs()))
                    .unwrap_or(0);
                [[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]][k]
            }
        }
    }

    /// Distance `t ∈ (0, reach]` from `p` along the axis direction `dir` to the boundary, if it is hit.
    pub fn boundary_crossing(&self, p: Point, axis: usize, dir: f64, reach: f64) -> Option<f64> {
        match *self {
            Shape::Disk { center, radius } => {
                let other = 1 - axis;
                let off = p[other] - center[other];
                let disc = radius * radius - off * off;
                if disc < 0.0 {
                    return None;
                }
                let half = disc.sqrt();
                let target = center[axis] + dir * half;
                let t = (target - p[axis]) * dir;
                (t > 0.0 && t <= reach).then_some(t)
            }
            Shape::Rectangle { min, max } => {
                let target = if dir > 0.0 { max[axis] } else { min[axis] };
                let t = (target - p[axis]) * dir;
                (t > 0.0 && t <= reach).then_some(t)
            }
        }
    }

    /// Area of `[x0,x1] × [y0,y1] ∩ Ω`.
    pub fn clipped_area(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        match *self {
            Shape::Rectangle { min, max } => {
                let w = (x1.min(max[0]) - x0.max(min[0])).max(0.0);
                let h = (y1.min(max[1]) - y0.max(min[1])).max(0.0);
                w * h
            }
            Shape::Disk { center, radius } => {
                disk_rect_area(x0 - center[0], x1 - center[0], y0 - center[1], y1 - center[1], radius)
            }
        }
    }

    /// Points along the boundary, roughly `spacing` apart.
    pub fn boundary_trace(&self, spacing: f64) -> Vec<Point> {
        match *self {
            Shape::Disk { center, radius } => {
                let n = ((2.0 * std::f64::consts::PI * radius / spacing).ceil() as usize).max(16);
                (0..n)
                    .map(|k| {
                        let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                        [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                    })
                    .collect()
            }
            Shape::Rectangle { min, max } => {
                let nx = (((max[0] - min[0]) / spacing).ceil() as usize).max(4);
                let ny = (((max[1] - min[1]) / spacing).ceil() as usize).max(4);
                let mut out = Vec::with_capacity(2 * (nx + ny));
                for k in 0..nx {
                    out.push([min[0] + (max[0] - min[0]) * k as f64 / nx as f64, min[1]]);
                }
                for k in 0..ny {
                    out.push([max[0], min[1] + (max[1] - min[1]) * k as f64 / ny as f64]);
                }
                for k in 0..nx {
                    out.push([max[0] - (max[0] - min[0]) * k as f64 / nx as f64, max[1]]);
                }
                for k in 0..ny {
                    out.push([min[0], max[1] - (max[1] - min[1]) * k as f64 / ny as f64]);
                }
                out
            }
        }
    }
}

/// Area of a rectangle intersected with the disk of radius `r` centred at the origin.
fn disk_rect_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    let corners = [[x0, y0], [x0, y1], [x1, y0], [x1, y1]];
    let r2 = r * r;
    if corners.iter().all(|c| c[0] * c[0] + c[1] * c[1] <= r2) {
        return (x1 - x0) * (y1 - y0);
    }
    let a = x0.max(-r);
    let b = x1.min(r);
    if b <= a {
        return 0.0;
    }
    // vertical extent of the intersection as a function of x; piecewise smooth between the breakpoints
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        if y.abs() < r {
            let x = (r2 - y * y).sqrt();
            cuts.push(x);
            cuts.push(-x);
        }
    }
    cuts.retain(|&x| x >= a && x <= b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // on each piece the top is either y1 or the upper arc, the bottom either y0 or the lower arc
    let arc = |x: f64| 0.5 * (x * (r2 - x * x).max(0.0).sqrt() + r2 * (x / r).clamp(-1.0, 1.0).asin());
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let half = (r2 - mid * mid).max(0.0).sqrt();
        let top_is_arc = half < y1;
        let bottom_is_arc = -half > y0;
        let top = if top_is_arc { half } else { y1 };
        let bottom = if bottom_is_arc { -half } else { y0 };
        if top <= bottom {
            continue;
        }
        let arc_part = arc(hi) - arc(lo);
        let t = if top_is_arc { arc_part } else { y1 * (hi - lo) };
        let b = if bottom_is_arc { -arc_part } else { y0 * (hi - lo) };
        total += t - b;
    }
    total.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipped_area_of_whole_disk() {
        let d = Shape::unit_disk();
        let a = d.clipped_area(-2.0, 2.0, -2.0, 2.0);
        assert!((a - std::f64::consts::PI).abs() < 1e-13, "{a}");
        let quarter = d.clipped_area(0.0, 1.0, 0.0, 1.0);
        assert!((quarter - std::f64::consts::FRAC_PI_4).abs() < 1e-13);
    }

    #[test]
    fn crossing_on_disk() {
        let d = Shape::unit_disk();
        let t = d.boundary_crossing([0.9, 0.0], 0, 1.0, 0.5).unwrap();
        assert!((t - 0.1).abs() < 1e-15);
        assert!(d.boundary_crossing([0.9, 0.0], 0, -1.0, 0.5).is_none());
    }

    #[test]
    fn rectangle_distance() {
        let s = Shape::unit_square();
        assert_eq!(s.distance_to_boundary([0.25, 0.5]), 0.25);
        assert!(s.distance_to_boundary([1.5, 0.5]) < 0.0);
    }
}
