//! Radial profile for a few exponents, with the matching core radius.

use lake_vortex::ansatz::scale_parameters;
use lake_vortex::profile::{solve_core_radius, solve_profile};

fn main() -> lake_vortex::Result<()> {
    for p in [1.5, 2.0, 3.0, 5.0] {
        let table = solve_profile(p, 4000)?;
        let (pa, pb) = table.pohozaev_errors();
        println!(
            "p = {p}: phi(0) = {:.8}  phi'(1) = {:.8}  int phi^p = {:.8}  identities {pa:.1e} {pb:.1e}",
            table.center_value(),
            table.slope_at_one,
            table.int_phi_p,
        );
        for k in [3.0, 6.0] {
            let eps = f64::exp(-k);
            let (delta, _) = scale_parameters(eps, p)?;
            let core = solve_core_radius(delta, 1.0, 4.0, &table)?;
            println!("    eps = e^-{k}: delta {delta:.3e}  s {:.4e}  s/eps {:.3}", core.s_delta, core.s_delta / eps);
        }
    }
    Ok(())
}
