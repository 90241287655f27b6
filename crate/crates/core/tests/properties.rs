use std::sync::OnceLock;

use proptest::prelude::*;

use lake_vortex::ansatz::{scale_parameters, vortex_parameters, StrengthSystem};
use lake_vortex::diagnostics::reconstruct_flow;
use lake_vortex::energy::{asymptotic_k, EnergyLandscape, EnergyReport, Objective};
use lake_vortex::geometry::{
    boundary_data, build_grid, Background, BackgroundFields, Bump, Depth, DomainGrid, GreenSolver, Neighbor, NodeKind, Shape,
};
use lake_vortex::profile::{eval_w, solve_profile, ProfileTable, RadialVortex, ScaledVortex};
use lake_vortex::solver::{Operator, SolvedState};

fn profile(p: u8) -> &'static ProfileTable {
    static TABLES: OnceLock<[ProfileTable; 3]> = OnceLock::new();
    let t = TABLES.get_or_init(|| [1.5, 2.0, 3.0].map(|p| solve_profile(p, 4000).unwrap()));
    &t[p as usize]
}

fn disk() -> &'static DomainGrid {
    static GRID: OnceLock<DomainGrid> = OnceLock::new();
    GRID.get_or_init(|| build_grid(Shape::unit_disk(), 1.0 / 32.0).unwrap())
}

fn square() -> &'static DomainGrid {
    static GRID: OnceLock<DomainGrid> = OnceLock::new();
    GRID.get_or_init(|| build_grid(Shape::Rectangle { min: [0.0, 0.0], max: [1.0, 0.75] }, 1.0 / 32.0).unwrap())
}

fn green() -> &'static GreenSolver<'static> {
    static SOLVER: OnceLock<GreenSolver<'static>> = OnceLock::new();
    SOLVER.get_or_init(|| GreenSolver::new(disk()).unwrap())
}

fn uniform_fields() -> &'static BackgroundFields {
    static FIELDS: OnceLock<BackgroundFields> = OnceLock::new();
    FIELDS.get_or_init(|| BackgroundFields::new(Background::uniform(1.0, 1.0), disk()).unwrap())
}

/// Up to three centers in the disk of radius 0.6, pairwise at least 0.3 apart.
fn centers() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0.0..0.6f64, 0.0..std::f64::consts::TAU), 1..=3)
        .prop_map(|v| v.into_iter().map(|(r, t)| [r * t.cos(), r * t.sin()]).collect::<Vec<_>>())
        .prop_filter("separated", |z| {
            z.iter().enumerate().all(|(i, a)| z[i + 1..].iter().all(|b| (a[0] - b[0]).hypot(a[1] - b[1]) > 0.3))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scaled_vortex_is_a_rescaled_radial_vortex(
        p in 0u8..3, k in 3.0..10.0f64, b_hat in 0.3..3.0f64, q_hat in 0.5..2.0f64, t in 0.0..1.0f64,
    ) {
        let table = profile(p);
        let (delta, _) = scale_parameters((-k).exp(), table.p).unwrap();
        let r = 4.0;
        let v = ScaledVortex::new(delta, b_hat, q_hat, r, table).unwrap();
        let e = table.scaling_exponent();
        let x = t * t * r;
        let w = b_hat.powf(-e) * eval_w(delta, b_hat.powf(e) * q_hat, r, x, table).unwrap();
        prop_assert!((v.value(x) - w).abs() <= 1e-12 * w.abs().max(1.0));
    }

    #[test]
    fn radial_vortex_is_c1_across_the_core_edge(p in 0u8..3, k in 3.0..10.0f64, a in 0.5..2.0f64) {
        let table = profile(p);
        let (delta, _) = scale_parameters((-k).exp(), table.p).unwrap();
        let w = RadialVortex::new(delta, a, 4.0, table).unwrap();
        let s = w.core_radius();
        let (lo, hi) = (s * (1.0 - 1e-9), s * (1.0 + 1e-9));
        prop_assert!((w.value_unchecked(lo) - w.value_unchecked(hi)).abs() <= 1e-6 * a);
        let (dl, dh) = (w.radial_derivative(lo), w.radial_derivative(hi));
        prop_assert!((dl - dh).abs() <= 1e-6 * dh.abs(), "{} {}", dl, dh);
    }

    #[test]
    fn strength_system_residual_is_tiny(z in centers(), k in 3.0..10.0f64) {
        let cache = green().cache(&z).unwrap();
        let system = StrengthSystem::single((-k).exp(), &cache, uniform_fields());
        let q = system.solve().unwrap();
        prop_assert!(system.residual(&q) <= 1e-12);
    }

    #[test]
    fn pair_system_without_negatives_is_the_single_system(z in centers(), k in 3.0..10.0f64) {
        let cache = green().cache(&z).unwrap();
        let eps = (-k).exp();
        let single = StrengthSystem::single(eps, &cache, uniform_fields()).solve().unwrap();
        let pair = StrengthSystem::pair(eps, &cache, uniform_fields(), z.len()).solve().unwrap();
        prop_assert_eq!(single, pair);
    }

    #[test]
    fn expansion_equals_the_sum_of_its_terms(z in centers(), k in 3.0..10.0f64, split in 0usize..4) {
        let cache = green().cache(&z).unwrap();
        let n_plus = split.min(z.len());
        let eps = (-k).exp();
        let report = match asymptotic_k(n_plus, eps, 2.0, &cache, uniform_fields(), profile(1)) {
            Ok(r) => r,
            Err(_) => return Ok(()),
        };
        prop_assert_eq!(report.k_asymptotic, report.sum_of_terms());
        let (vortices, _) = vortex_parameters(n_plus, eps, 2.0, &cache, uniform_fields(), profile(1)).unwrap();
        let (delta, _) = scale_parameters(eps, 2.0).unwrap();
        prop_assert_eq!(EnergyReport::from_vortices(vortices, eps, delta, &cache).k_asymptotic, report.k_asymptotic);
    }

    #[test]
    fn harmonic_part_obeys_the_maximum_principle(r in 0.0..0.85f64, t in 0.0..std::f64::consts::TAU) {
        let z = [r * t.cos(), r * t.sin()];
        let g = disk();
        let h = green().h_field(z).unwrap();
        let (mut bmin, mut bmax) = (f64::MAX, f64::MIN);
        for st in &g.stencils {
            for arm in &st.arms {
                if let Neighbor::Dirichlet { point, .. } = arm.neighbor {
                    let v = boundary_data(point, z);
                    bmin = bmin.min(v);
                    bmax = bmax.max(v);
                }
            }
        }
        for st in &g.stencils {
            prop_assert!(h[st.node] >= bmin - 1e-12 && h[st.node] <= bmax + 1e-12);
        }
    }

    #[test]
    fn robin_increases_toward_the_boundary(t in 0.0..std::f64::consts::TAU) {
        let values: Vec<f64> = [0.0, 0.2, 0.4, 0.6, 0.8]
            .iter()
            .map(|&r| green().robin([r * t.cos(), r * t.sin()]).unwrap())
            .collect();
        prop_assert!(values.windows(2).all(|w| w[1] > w[0]), "{:?}", values);
    }

    #[test]
    fn jacobian_passes_the_ratio_test(seed in any::<u64>(), pair in any::<bool>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let op = Operator::new(disk(), uniform_fields(), 0.05, 2.0, pair);
        let n = op.dim();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.5..2.5)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jv = op.jacobian(&x).to_csc().unwrap().mul_vec(&v);
        let f0 = op.residual(&x);
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&t| {
                let xt: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + t * b).collect();
                op.residual(&xt).iter().zip(&f0).zip(&jv).map(|((a, b), c)| ((a - b) / t - c).abs()).fold(0.0, f64::max)
            })
            .collect();
        prop_assert!(errs[1] < 0.2 * errs[0] && errs[2] < 0.2 * errs[1], "{:?}", errs);
    }

    #[test]
    fn nonnegative_source_gives_nonnegative_solution(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let op = Operator::new(disk(), uniform_fields(), 0.1, 2.0, false);
        let rhs: Vec<f64> = (0..op.dim()).map(|_| if rng.random_bool(0.3) { rng.random_range(0.0..5.0) } else { 0.0 }).collect();
        let w = op.diffusion().to_csc().unwrap().lu().unwrap().solve(&rhs).unwrap();
        prop_assert!(w.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn divergence_vanishes_on_rectangles(seed in any::<u64>(), k in 3.0..8.0f64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = square();
        let background = Background::ConstantDepth { depth: 1.0, stream: 1.0, gradient: [0.25, -0.125], quadratic: [0.5, 0.25] };
        let fields = BackgroundFields::new(background, g).unwrap();
        let w: Vec<f64> = (0..g.node_count())
            .map(|i| if g.kinds[i] == NodeKind::Interior { rng.random_range(-1.0..3.0) } else { 0.0 })
            .collect();
        let eps = (-k).exp();
        let (delta, _) = scale_parameters(eps, 2.0).unwrap();
        let state = SolvedState {
            correction: vec![0.0; w.len()],
            w,
            eps,
            delta,
            p: 2.0,
            pair_mode: false,
            correction_sup: 0.0,
            residual_sup: 0.0,
            residual_relative: 0.0,
            residual_p: 0.0,
            rhs_scale: 0.0,
            newton_trace: Vec::new(),
            converged: true,
        };
        let flow = reconstruct_flow(&state, &fields, g);
        prop_assert!(flow.divergence_relative <= 1e-10, "{}", flow.divergence_relative);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pohozaev_identities_hold(p in 1.3..4.0f64) {
        let t = solve_profile(p, 4000).unwrap();
        let (a, b) = t.pohozaev_errors();
        prop_assert!(a <= 1e-6 && b <= 1e-6, "p = {}: {} {}", p, a, b);
    }

    #[test]
    fn common_scaling_of_q_and_b_keeps_the_argmin(c in 0.25..4.0f64, k in 4.0..8.0f64) {
        let g = disk();
        let field = |c: f64| {
            let depth = Depth::Bumps { base: c, bumps: vec![Bump { center: [0.2, -0.1], amplitude: c, width: 0.3 }] };
            BackgroundFields::new(Background::ConstantStream { stream: c, depth }, g).unwrap()
        };
        let (f1, fc) = (field(1.0), field(c));
        let eps = (-k).exp();
        let lattice: Vec<[f64; 2]> = (0..9).flat_map(|i| (0..9).map(move |j| [-0.2 + 0.1 * i as f64, -0.5 + 0.1 * j as f64])).collect();
        let argmin = |f: &BackgroundFields| {
            let land = EnergyLandscape::new(g, f, profile(1), 2.0, eps).unwrap();
            lattice
                .iter()
                .map(|z| land.evaluate(&[*z], 1, Objective::Asymptotic).unwrap().k_asymptotic)
                .enumerate()
                .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
                .0
        };
        prop_assert_eq!(argmin(&f1), argmin(&fc));
    }
}
