//! Radial vortex profile.
//!
//! The inner shape of every vortex is the positive radial solution of
//! `-Δφ = φ^p` in the unit disk with `φ = 0` on the unit circle. It is found
//! by shooting on `ψ'' + ψ'/r + ψ^p = 0` with `ψ(0) = 1`, then rescaling the
//! first zero `r₀` of `ψ` to radius one via `φ(ρ) = r₀^{2/(p-1)} ψ(r₀ ρ)`.
//!
//! On top of the profile this module solves the core-radius equation and
//! evaluates the explicit single-vortex field `W_{δ,a}` on a ball of radius `R`
//! together with its depth-scaled variant `V_{δ,b̂,q̂}`.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};

/// Largest RK4 substep used while shooting.
const MAX_STEP: f64 = 2.0e-4;

/// Tabulated profile for a fixed exponent.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    /// Nonlinearity exponent, `p > 1`.
    pub p: f64,
    /// Uniform radii on `[0, 1]`.
    pub radii: Vec<f64>,
    /// `φ` at each radius; the last entry is exactly zero.
    pub values: Vec<f64>,
    /// `φ'` at each radius.
    pub derivatives: Vec<f64>,
    /// `φ'(1) < 0`.
    pub slope_at_one: f64,
    /// `∫_{B₁} φ^p`.
    pub int_phi_p: f64,
    /// `∫_{B₁} φ^{p+1}`.
    pub int_phi_p1: f64,
    /// First zero of the unit-height shooting solution.
    pub shooting_zero: f64,
}

/// State of the augmented radial system `[ψ, ψ', ∫ rψ^p, ∫ rψ^{p+1}]`.
type State = [f64; 4];

fn rhs(p: f64, r: f64, y: &State) -> State {
    let psi = y[0].max(0.0);
    let psi_p = psi.powf(p);
    [y[1], -y[1] / r - psi_p, r * psi_p, r * psi_p * psi]
}

fn rk4_step(p: f64, r: f64, y: &State, h: f64) -> State {
    let add = |a: &State, b: &State, s: f64| -> State {
        [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]]
    };
    let k1 = rhs(p, r, y);
    let k2 = rhs(p, r + 0.5 * h, &add(y, &k1, 0.5 * h));
    let k3 = rhs(p, r + 0.5 * h, &add(y, &k2, 0.5 * h));
    let k4 = rhs(p, r + h, &add(y, &k3, h));
    let mut out = *y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Taylor start at small `r`, removing the coordinate singularity at the origin.
fn series_start(p: f64, r: f64) -> State {
    let r2 = r * r;
    [
        1.0 - r2 / 4.0 + p * r2 * r2 / 64.0,
        -r / 2.0 + p * r2 * r / 16.0,
        r2 / 2.0 - p * r2 * r2 / 16.0,
        r2 / 2.0 - (p + 1.0) * r2 * r2 / 16.0,
    ]
}

/// Locate the first zero of the unit-height solution.
fn first_zero(p: f64) -> Result<f64> {
    let h = 1.0e-3;
    let mut r = h;
    let mut y = series_start(p, r);
    // The first zero of ψ lies well below this radius for every p > 1 we care about.
    let r_max = 200.0;
    while r < r_max {
        let next = rk4_step(p, r, &y, h);
        if next[0] <= 0.0 {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if rk4_step(p, r, &y, mid)[0] > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(r + 0.5 * (lo + hi));
        }
        y = next;
        r += h;
    }
    Err(Error::NoConvergence(format!(
        "no sign change of the shooting solution below r = {r_max} for p = {p}"
    )))
}

/// Solve the unit-disk profile problem and tabulate `φ` on `grid_size` radii.
pub fn solve_profile(p: f64, grid_size: usize) -> Result<ProfileTable> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::ExponentOutOfRange(p));
    }
    if grid_size < 64 {
        return Err(Error::NoConvergence(format!(
            "grid_size = {grid_size} is below the minimum of 64"
        )));
    }
    let r0 = first_zero(p)?;

    // Second pass on substeps aligned with the table radii.
    let intervals = grid_size - 1;
    let coarse = r0 / intervals as f64;
    let sub = (coarse / MAX_STEP).ceil().max(1.0) as usize;
    let h = coarse / sub as f64;

    let mut psi = Vec::with_capacity(grid_size);
    let mut dpsi = Vec::with_capacity(grid_size);
    psi.push(1.0);
    dpsi.push(0.0);
    let mut y = series_start(p, h);
    let mut r = h;
    let mut step = 1;
    for i in 1..=intervals {
        while step < i * sub {
            y = rk4_step(p, r, &y, h);
            step += 1;
            r = step as f64 * h;
        }
        psi.push(y[0]);
        dpsi.push(y[1]);
    }
    let (ip, ip1) = (y[2], y[3]);

    let k = 2.0 / (p - 1.0);
    let amp = r0.powf(k);
    let radii: Vec<f64> = (0..grid_size).map(|i| i as f64 / intervals as f64).collect();
    let mut values: Vec<f64> = psi.iter().map(|v| amp * v).collect();
    *values.last_mut().unwrap() = 0.0;
    let derivatives: Vec<f64> = dpsi.iter().map(|d| amp * r0 * d).collect();
    let slope_at_one = *derivatives.last().unwrap();
    if !(slope_at_one < 0.0) {
        return Err(Error::NoConvergence(format!(
            "nonnegative boundary slope {slope_at_one}"
        )));
    }

    Ok(ProfileTable {
        p,
        radii,
        values,
        derivatives,
        slope_at_one,
        int_phi_p: 2.0 * PI * amp * ip,
        int_phi_p1: 2.0 * PI * amp * amp * ip1,
        shooting_zero: r0,
    })
}

impl ProfileTable {
    /// `2/(p-1)`, the scaling exponent of the profile equation.
    pub fn scaling_exponent(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    /// `φ(0)`.
    pub fn center_value(&self) -> f64 {
        self.values[0]
    }

    fn locate(&self, rho: f64) -> (usize, f64) {
        let n = self.radii.len() - 1;
        let t = rho.clamp(0.0, 1.0) * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        (i, t - i as f64)
    }

    /// `φ(ρ)` for `ρ ∈ [0, 1]` by cubic Hermite interpolation; zero outside.
    pub fn phi(&self, rho: f64) -> f64 {
        if rho >= 1.0 {
            return 0.0;
        }
        let (i, t) = self.locate(rho);
        let h = 1.0 / (self.radii.len() - 1) as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.derivatives[i] * h, self.derivatives[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1
    }

    /// `φ'(ρ)` for `ρ ∈ [0, 1]`.
    pub fn dphi(&self, rho: f64) -> f64 {
        if rho >= 1.0 {
            return self.slope_at_one;
        }
        let (i, t) = self.locate(rho);
        let h = 1.0 / (self.radii.len() - 1) as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.derivatives[i] * h, self.derivatives[i + 1] * h);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h
    }

    /// Relative errors of the two Pohozaev identities
    /// `∫φ^p = 2π|φ'(1)|` and `∫φ^{p+1} = π(p+1)/2·|φ'(1)|²`.
    pub fn pohozaev_errors(&self) -> (f64, f64) {
        let s = self.slope_at_one.abs();
        let first = 2.0 * PI * s;
        let second = PI * (self.p + 1.0) / 2.0 * s * s;
        (
            (self.int_phi_p - first).abs() / first,
            (self.int_phi_p1 - second).abs() / second,
        )
    }

    /// Write the table as CSV with columns `radius,phi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "radius,phi")?;
        for (r, v) in self.radii.iter().zip(&self.values) {
            writeln!(out, "{r:.17e},{v:.17e}")?;
        }
        Ok(())
    }
}

/// Solution of `δ^{2/(p-1)} s^{-2/(p-1)} φ'(1) = a / ln(s/R)` in `(0, R)`.
#[derive(Debug, Clone, Copy)]
pub struct CoreRadius {
    pub s_delta: f64,
    pub delta: f64,
    pub a: f64,
    pub r_enclosing: f64,
}

impl CoreRadius {
    /// Relative residual of the defining equation at the stored root.
    pub fn relative_residual(&self, profile: &ProfileTable) -> f64 {
        let k = profile.scaling_exponent();
        let lhs = (self.delta / self.s_delta).powf(k) * profile.slope_at_one;
        let rhs = self.a / (self.s_delta / self.r_enclosing).ln();
        ((lhs - rhs) / rhs).abs()
    }
}

/// Log form of the core-radius equation; strictly increasing in `t = ln s`.
fn core_equation(t: f64, ln_r: f64, ln_a: f64, ln_c: f64, k: f64) -> f64 {
    ln_a + k * t - ln_c - (ln_r - t).ln()
}

/// Find the unique core radius for threshold `a` inside `B_R`.
pub fn solve_core_radius(delta: f64, a: f64, r: f64, profile: &ProfileTable) -> Result<CoreRadius> {
    if !(delta > 0.0 && a > 0.0 && r > 0.0) || !(delta.is_finite() && a.is_finite() && r.is_finite()) {
        return Err(Error::NoRoot(format!(
            "need positive finite inputs, got delta = {delta}, a = {a}, R = {r}"
        )));
    }
    if !(profile.slope_at_one < 0.0) {
        return Err(Error::NoRoot("profile slope at one is not negative".into()));
    }
    let k = profile.scaling_exponent();
    let ln_r = r.ln();
    let ln_a = a.ln();
    // ln(δ^k |φ'(1)|)
    let ln_c = k * delta.ln() + profile.slope_at_one.abs().ln();
    let f = |t: f64| core_equation(t, ln_r, ln_a, ln_c, k);

    let mut hi = ln_r + (-1.0e-9f64).ln_1p();
    let mut lo = delta.ln().min(hi - 1.0);
    let mut tries = 0;
    while f(lo) >= 0.0 {
        lo -= 3.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::NoRoot(format!(
                "could not bracket the root below s = {:.3e}",
                lo.exp()
            )));
        }
    }
    if f(hi) <= 0.0 {
        return Err(Error::NoRoot(format!(
            "equation is still negative at s = R(1 - 1e-9) for delta = {delta}, a = {a}"
        )));
    }

    // Bisection safeguarded secant (Illinois variant).
    let (mut flo, mut fhi) = (f(lo), f(hi));
    let mut t = lo;
    let mut side = 0i8;
    for _ in 0..200 {
        t = (lo * fhi - hi * flo) / (fhi - flo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let ft = f(t);
        if ft.abs() < 1.0e-15 || (hi - lo) < 1.0e-15 * t.abs().max(1.0) {
            break;
        }
        if ft < 0.0 {
            lo = t;
            flo = ft;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            fhi = ft;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(CoreRadius {
        s_delta: t.exp(),
        delta,
        a,
        r_enclosing: r,
    })
}

/// The explicit radial solution `W_{δ,a}` on `B_R(0)`.
#[derive(Debug, Clone, Copy)]
pub struct RadialVortex<'a> {
    profile: &'a ProfileTable,
    pub core: CoreRadius,
    /// `(δ/s_δ)^{2/(p-1)}`.
    pub amplitude: f64,
    ln_s_over_r: f64,
}

impl<'a> RadialVortex<'a> {
    pub fn new(delta: f64, a: f64, r: f64, profile: &'a ProfileTable) -> Result<Self> {
        let core = solve_core_radius(delta, a, r, profile)?;
        Ok(Self::from_core(core, profile))
    }

    pub fn from_core(core: CoreRadius, profile: &'a ProfileTable) -> Self {
        let k = profile.scaling_exponent();
        Self {
            profile,
            core,
            amplitude: (core.delta / core.s_delta).powf(k),
            ln_s_over_r: (core.s_delta / core.r_enclosing).ln(),
        }
    }

    pub fn core_radius(&self) -> f64 {
        self.core.s_delta
    }

    /// `W(|x|)`; callers guarantee `0 ≤ radius ≤ R`.
    pub fn value_unchecked(&self, radius: f64) -> f64 {
        let s = self.core.s_delta;
        if radius <= s {
            self.core.a + self.amplitude * self.profile.phi(radius / s)
        } else {
            self.core.a * (radius / self.core.r_enclosing).ln() / self.ln_s_over_r
        }
    }

    pub fn value(&self, radius: f64) -> Result<f64> {
        if radius < 0.0 || radius > self.core.r_enclosing {
            return Err(Error::OutOfBall {
                radius,
                r_enclosing: self.core.r_enclosing,
            });
        }
        Ok(self.value_unchecked(radius))
    }

    /// Radial derivative `dW/dr`.
    pub fn radial_derivative(&self, radius: f64) -> f64 {
        let s = self.core.s_delta;
        if radius <= s {
            self.amplitude * self.profile.dphi(radius / s) / s
        } else {
            self.core.a / (radius * self.ln_s_over_r)
        }
    }
}

/// Evaluate `W_{δ,a}` at distance `x_radius` from the center.
pub fn eval_w(delta: f64, a: f64, r: f64, x_radius: f64, profile: &ProfileTable) -> Result<f64> {
    if x_radius < 0.0 || x_radius > r {
        return Err(Error::OutOfBall {
            radius: x_radius,
            r_enclosing: r,
        });
    }
    RadialVortex::new(delta, a, r, profile)?.value(x_radius)
}

/// Depth-scaled vortex `V_{δ,b̂,q̂} = b̂^{-2/(p-1)} W_{δ, b̂^{2/(p-1)} q̂}`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledVortex<'a> {
    pub inner: RadialVortex<'a>,
    pub b_hat: f64,
    pub q_hat: f64,
    scale: f64,
}

impl<'a> ScaledVortex<'a> {
    pub fn new(delta: f64, b_hat: f64, q_hat: f64, r: f64, profile: &'a ProfileTable) -> Result<Self> {
        let k = profile.scaling_exponent();
        let scale = b_hat.powf(-k);
        let a = b_hat.powf(k) * q_hat;
        Ok(Self {
            inner: RadialVortex::new(delta, a, r, profile)?,
            b_hat,
            q_hat,
            scale,
        })
    }

    pub fn core_radius(&self) -> f64 {
        self.inner.core.s_delta
    }

    pub fn value(&self, radius: f64) -> f64 {
        self.scale * self.inner.value_unchecked(radius)
    }

    /// `(V - q̂)₊`, nonzero only inside the core.
    pub fn excess(&self, radius: f64) -> f64 {
        let s = self.inner.core.s_delta;
        if radius >= s {
            0.0
        } else {
            self.scale * self.inner.amplitude * self.inner.profile.phi(radius / s)
        }
    }

    pub fn radial_derivative(&self, radius: f64) -> f64 {
        self.scale * self.inner.radial_derivative(radius)
    }
}
