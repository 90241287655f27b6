//! Physical fields of one solved vortex: cores, circulation, and structural checks of the flow.

use lake_vortex::diagnostics::{circulation, circulation_limit, extract_cores, reconstruct_flow};
use lake_vortex::geometry::{Background, Shape};
use lake_vortex::profile::solve_profile;
use lake_vortex::solver::{GridPolicy, NewtonOptions, Problem};

fn main() -> lake_vortex::Result<()> {
    let profile = solve_profile(2.0, 4000)?;
    let problem = Problem {
        shape: Shape::unit_square(),
        background: Background::uniform(1.0, 1.0),
        p: 2.0,
        centers_plus: vec![[0.5, 0.5]],
        centers_minus: vec![],
        grid: GridPolicy::adaptive(1.0 / 32.0),
        newton: NewtonOptions::default(),
    };
    let eps = (-5.0f64).exp();
    let rung = problem.solve(eps, &profile, None)?;
    let state = rung.state.as_ref().unwrap();
    let cores = extract_cores(state, &rung.fields, &rung.grid)?;
    for c in &cores.components {
        println!(
            "core at ({:.4}, {:.4}): {} nodes, diameter/eps {:.3}, contained in B(r) with r/eps {:.3}",
            c.centroid[0], c.centroid[1], c.node_count, c.diameter / eps, c.containment_over_eps
        );
    }
    let circ = circulation(state, &rung.fields, &rung.grid);
    let limit = circulation_limit(&rung.fields, &problem.centers_plus, &[1.0]);
    println!("circulation {:.5}, point-vortex limit {:.5}", circ.total, limit);
    let flow = reconstruct_flow(state, &rung.fields, &rung.grid);
    println!(
        "div(bv) {:.1e}  stationarity {:.1e} ({} nodes)  boundary flux {:.1e}  curl {}",
        flow.divergence_relative, flow.stationarity_relative, flow.stationarity_nodes, flow.flux_error, flow.curl_convention
    );
    Ok(())
}
