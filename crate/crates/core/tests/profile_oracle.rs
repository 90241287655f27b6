//! Profile table against a direct shooting on φ(0) with an adaptive Dormand–Prince integrator.

use lake_vortex::profile::solve_profile;

type Y = [f64; 2];

fn rhs(p: f64, r: f64, y: &Y) -> Y {
    [y[1], -y[1] / r - y[0].max(0.0).powf(p)]
}

/// Integrates `φ'' + φ'/r + φ₊^p = 0` from `φ(0) = c` to `r = 1`, returning `φ` and `φ'` at
/// each radius in `stops` (increasing, last one = 1).
fn shoot(p: f64, c: f64, stops: &[f64]) -> Vec<Y> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let r0 = 1e-6;
    let cp = c.powf(p);
    let mut y: Y = [c - cp * r0 * r0 / 4.0, -cp * r0 / 2.0];
    let mut r = r0;
    let mut h: f64 = 1e-4;
    let mut out = Vec::new();
    for &stop in stops {
        while r < stop {
            let h_try = h.min(stop - r);
            let mut k = [[0.0; 2]; 7];
            k[0] = rhs(p, r, &y);
            for s in 0..6 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    ys[0] += h_try * A[s][j] * kj[0];
                    ys[1] += h_try * A[s][j] * kj[1];
                }
                k[s + 1] = rhs(p, r + C[s] * h_try, &ys);
            }
            let mut y_new = y;
            let mut err: f64 = 0.0;
            for d in 0..2 {
                y_new[d] = y[d] + h_try * (0..6).map(|j| A[5][j] * k[j][d]).sum::<f64>();
                let e = h_try * (0..7).map(|j| E[j] * k[j][d]).sum::<f64>();
                err = err.max(e.abs() / (1e-13 + 1e-13 * y[d].abs().max(y_new[d].abs())));
            }
            if err <= 1.0 {
                r += h_try;
                y = y_new;
            }
            h = h_try * (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        }
        out.push(y);
    }
    out
}

/// `φ(0)` with `φ(1) = 0` by secant iteration, started from the scaling guess.
fn center_value(p: f64, guess: f64) -> f64 {
    let f = |c: f64| shoot(p, c, &[1.0])[0][0];
    let (mut a, mut b) = (guess * 0.98, guess * 1.02);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..60 {
        let c = b - fb * (b - a) / (fb - fa);
        a = b;
        fa = fb;
        b = c;
        fb = f(b);
        if (b - a).abs() < 1e-14 * b {
            break;
        }
    }
    b
}

#[test]
fn shooting_oracle_matches_the_table() {
    for p in [1.5, 2.0, 3.0] {
        let table = solve_profile(p, 4000).unwrap();
        let c = center_value(p, table.center_value());
        let stops = [0.25, 0.5, 0.75, 1.0];
        let ys = shoot(p, c, &stops);
        assert!((c - table.center_value()).abs() <= 1e-8 * c, "p = {p}: phi(0) {c} vs {}", table.center_value());
        for (&r, y) in stops.iter().zip(&ys) {
            let scale = table.center_value();
            assert!((table.phi(r) - y[0]).abs() <= 1e-7 * scale, "p = {p}, r = {r}: {} vs {}", table.phi(r), y[0]);
        }
        let slope = ys[3][1];
        assert!(
            (slope - table.slope_at_one).abs() <= 1e-8 * slope.abs(),
            "p = {p}: phi'(1) {slope} vs {}",
            table.slope_at_one
        );
    }
}
