//! Reduced energy of two like-signed vortices: itemized expansion, quadrature, and the located minimizer.

use lake_vortex::ansatz::Admissibility;
use lake_vortex::energy::{optimize_centers, EnergyLandscape, Extremum, Objective, OptimizerOptions, SearchRegion};
use lake_vortex::geometry::{build_grid, Background, BackgroundFields, Bump, Depth, Shape};
use lake_vortex::profile::solve_profile;

fn main() -> lake_vortex::Result<()> {
    let p = 2.0;
    let profile = solve_profile(p, 4000)?;
    let shape = Shape::unit_disk();
    let grid = build_grid(shape, 1.0 / 64.0)?;
    let bumps = [-0.4, 0.4].map(|x| Bump { center: [x, 0.0], amplitude: 1.0, width: 0.2 }).to_vec();
    let background = Background::ConstantStream { stream: 1.0, depth: Depth::Bumps { base: 1.0, bumps } };
    let fields = BackgroundFields::new(background, &grid)?;

    for k in [4.0, 6.0, 8.0] {
        let eps = f64::exp(-k);
        let landscape = EnergyLandscape::new(&grid, &fields, &profile, p, eps)?;
        let r = landscape.evaluate(&[[-0.4, 0.0], [0.4, 0.0]], 2, Objective::Quadrature)?;
        println!(
            "eps = e^-{k} at the apexes: K {:.6e}  I(V) {:.6e}  leading {:?}  interaction {:.3e}",
            r.k_asymptotic,
            r.i_quadrature.unwrap_or(f64::NAN),
            r.leading_terms.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>(),
            r.interaction_terms.iter().map(|t| t.value).sum::<f64>(),
        );
        let region = SearchRegion::interior(vec![[-0.4, 0.0], [0.4, 0.0]], 2, 0.2, Admissibility::for_shape(&shape));
        let best = optimize_centers(&landscape, &region, Objective::Asymptotic, Extremum::Min, &OptimizerOptions::default())?;
        println!(
            "    minimizer {:?} after {} evaluations",
            best.centers.iter().map(|z| format!("({:.4}, {:.4})", z[0], z[1])).collect::<Vec<_>>(),
            best.evaluations
        );
    }
    Ok(())
}
