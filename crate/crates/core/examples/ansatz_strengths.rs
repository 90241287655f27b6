//! Two-vortex ansatz: strength system, core radii and the residual of the approximate solution.

use lake_vortex::ansatz::{residual_l_delta, StrengthSystem};
use lake_vortex::geometry::{Background, Shape};
use lake_vortex::profile::solve_profile;
use lake_vortex::solver::{GridPolicy, NewtonOptions, Problem};

fn main() -> lake_vortex::Result<()> {
    let p = 2.0;
    let profile = solve_profile(p, 4000)?;
    let problem = Problem {
        shape: Shape::unit_disk(),
        background: Background::uniform(1.0, 1.0),
        p,
        centers_plus: vec![[-0.3, 0.0], [0.35, 0.1]],
        centers_minus: vec![],
        grid: GridPolicy::adaptive(1.0 / 32.0),
        newton: NewtonOptions::default(),
    };
    for k in [3.0, 5.0, 7.0] {
        let eps = f64::exp(-k);
        let rung = problem.setup(eps, &profile)?;
        let system = StrengthSystem::single(eps, &rung.green, &rung.fields);
        let ansatz = &rung.ansatz;
        let res = residual_l_delta(ansatz, &rung.fields, &rung.grid, &profile)?;
        println!(
            "eps = e^-{k}: q_hat {:?}  s {:?}  dominance {:.3}  positivity margin {:.2e} (L = {})  |l|_p {:.2e}  |l|_sup {:.2e}",
            ansatz.strengths().iter().map(|q| format!("{q:.5}")).collect::<Vec<_>>(),
            ansatz.core_radii().iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>(),
            system.dominance_margin(),
            ansatz.positivity_margin,
            ansatz.l_mult,
            res.norm_p,
            res.norm_sup,
        );
    }
    Ok(())
}
