//! Vortex pinned by a depth bump: plain Newton stalls once the core is small, and the projected
//! solve moves the center until the translation multipliers vanish.

use lake_vortex::geometry::{Background, Bump, Depth, Shape};
use lake_vortex::profile::solve_profile;
use lake_vortex::solver::{GridPolicy, NewtonOptions, Problem};

fn main() -> lake_vortex::Result<()> {
    let profile = solve_profile(2.0, 4000)?;
    let depth = Depth::Bumps { base: 1.0, bumps: vec![Bump { center: [0.2, 0.1], amplitude: 1.0, width: 0.3 }] };
    let problem = Problem {
        shape: Shape::unit_disk(),
        background: Background::ConstantStream { stream: 1.0, depth },
        p: 2.0,
        centers_plus: vec![[0.21, 0.1]],
        centers_minus: vec![],
        grid: GridPolicy::adaptive(1.0 / 32.0),
        newton: NewtonOptions::default(),
    };
    let eps = (-5.0f64).exp();
    let rung = problem.solve(eps, &profile, None)?;
    let state = rung.state.as_ref().unwrap();
    match &rung.projection {
        Some(pr) => println!(
            "center {:?} -> {:?} in {} outer steps, multipliers {:.2e} -> {:.2e}",
            pr.start[0],
            pr.centers[0],
            pr.outer_iterations,
            pr.initial_multipliers.iter().fold(0.0f64, |a, c| a.max(c.abs())),
            pr.multipliers.iter().fold(0.0f64, |a, c| a.max(c.abs())),
        ),
        None => println!("plain Newton converged at the starting center"),
    }
    println!("residual {:.1e}  correction {:.3e}", state.residual_relative, state.correction_sup);
    Ok(())
}
