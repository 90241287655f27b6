//! Single vortex in the unit disk solved along an ε ladder.

use std::time::Instant;

use lake_vortex::diagnostics::{reconstruct_flow, trend_table};
use lake_vortex::geometry::{Background, Shape};
use lake_vortex::profile::solve_profile;
use lake_vortex::solver::{continuation_ladder, GridPolicy, NewtonOptions, Problem};

fn main() -> lake_vortex::Result<()> {
    let profile = solve_profile(2.0, 4000)?;
    let problem = Problem {
        shape: Shape::unit_disk(),
        background: Background::uniform(1.0, 1.0),
        p: 2.0,
        centers_plus: vec![[0.0, 0.0]],
        centers_minus: vec![],
        grid: GridPolicy::adaptive(1.0 / 32.0),
        newton: NewtonOptions::default(),
    };
    let eps: Vec<f64> = (3..=8).map(|k| (-(k as f64)).exp()).collect();
    let t = Instant::now();
    let ladder = continuation_ladder(&problem, &eps, &profile)?;
    for rung in &ladder.rungs {
        let s = rung.state.as_ref().unwrap();
        println!(
            "eps {:.3e}  nodes {:>6}  newton {:>2}  residual {:.1e}  correction {:.3e}  q_hat {:.4}  warm {}",
            s.eps,
            rung.grid.node_count(),
            s.newton_trace.len() - 1,
            s.residual_relative,
            s.correction_sup,
            rung.ansatz.vortices[0].q_hat,
            rung.warm_started,
        );
    }
    if let Some((e, err)) = &ladder.failure {
        println!("failed at eps {e:.3e}: {err}");
    }
    let table = trend_table(&ladder.rungs, &problem.centers_plus)?;
    table.write_csv(std::io::stdout())?;
    for fit in &table.fits {
        println!("slope of {} against ln|ln eps|: {:.3}", fit.column, fit.slope);
    }
    if let Some(last) = ladder.rungs.last() {
        let flow = reconstruct_flow(last.state.as_ref().unwrap(), &last.fields, &last.grid);
        println!(
            "div(bv) relative {:.1e}  stationarity relative {:.1e} on {} nodes  flux {:.1e}",
            flow.divergence_relative, flow.stationarity_relative, flow.stationarity_nodes, flow.flux_error
        );
    }
    println!("elapsed {:.2?}", t.elapsed());
    Ok(())
}
