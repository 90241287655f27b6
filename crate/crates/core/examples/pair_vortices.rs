//! Opposite-signed pair in the unit disk; the centers are moved to where the projected problem balances.

use lake_vortex::diagnostics::{circulation, extract_cores};
use lake_vortex::geometry::{Background, Shape};
use lake_vortex::profile::solve_profile;
use lake_vortex::solver::{GridPolicy, NewtonOptions, Problem};

fn main() -> lake_vortex::Result<()> {
    let profile = solve_profile(2.0, 4000)?;
    let problem = Problem {
        shape: Shape::unit_disk(),
        background: Background::uniform(1.0, 1.0),
        p: 2.0,
        centers_plus: vec![[0.4, 0.0]],
        centers_minus: vec![[-0.4, 0.0]],
        grid: GridPolicy::adaptive(1.0 / 32.0),
        newton: NewtonOptions::default(),
    };
    let mut previous = None;
    for k in [3.0, 4.0] {
        let eps = f64::exp(-k);
        let rung = problem.solve(eps, &profile, previous.as_ref())?;
        let state = rung.state.as_ref().unwrap();
        let circ = circulation(state, &rung.fields, &rung.grid);
        let cores = extract_cores(state, &rung.fields, &rung.grid)?;
        println!(
            "eps = e^-{k}: centers {:?}  circulation +{:.4} {:.4} total {:.1e}  cores {}+{}  residual {:.1e}",
            rung.ansatz.vortices.iter().map(|v| format!("({:.4}, {:.4})", v.center[0], v.center[1])).collect::<Vec<_>>(),
            circ.plus,
            circ.minus,
            circ.total,
            cores.count_plus,
            cores.count_minus,
            state.residual_relative,
        );
        previous = Some(rung);
    }
    Ok(())
}
