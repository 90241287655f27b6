//! Vortex pushed toward the boundary by an exponentially deepening basin: the reduced-energy
//! minimizer approaches the boundary point as ε decreases.

use lake_vortex::ansatz::Admissibility;
use lake_vortex::energy::{optimize_centers, EnergyLandscape, Extremum, Objective, OptimizerOptions, SearchRegion};
use lake_vortex::geometry::{build_grid_with, Background, BackgroundFields, Depth, GridSpec, Refinement, Shape};
use lake_vortex::profile::solve_profile;

fn main() -> lake_vortex::Result<()> {
    let p = 2.0;
    let profile = solve_profile(p, 4000)?;
    let shape = Shape::unit_disk();
    let anchor = [1.0, 0.0];
    let admissibility = Admissibility { rho: 0.2, l_bar: 2.0, eta: 0.2, alpha: 4.0 };
    let spec = GridSpec {
        spacing: 1.0 / 32.0,
        refinements: vec![Refinement { center: anchor, spacing: 1.0 / 256.0, plateau: admissibility.eta }],
        grading: 0.15,
    };
    let grid = build_grid_with(shape, &spec)?;
    let depth = Depth::Exponential { base: 1.0, gradient: [2.0, 0.0] };
    let fields = BackgroundFields::new(Background::ConstantStream { stream: 1.0, depth }, &grid)?;
    let region = SearchRegion::boundary(vec![anchor], 1, admissibility);
    for k in [5.0, 6.0, 7.0, 8.0] {
        let eps = f64::exp(-k);
        let landscape = EnergyLandscape::new(&grid, &fields, &profile, p, eps)?;
        let r = optimize_centers(&landscape, &region, Objective::Asymptotic, Extremum::Min, &OptimizerOptions::default())?;
        let (lo, hi) = region.distance_window(eps);
        let z = r.centers[0];
        println!(
            "eps = e^-{k}: z ({:.4}, {:.4})  dist {:.4} in ({lo:.2e}, {hi:.3})  alpha_hat {:.3}  c_hat {:.3}",
            z[0],
            z[1],
            shape.distance_to_boundary(z),
            r.alpha_hat[0],
            r.c_hat[0],
        );
    }
    Ok(())
}
