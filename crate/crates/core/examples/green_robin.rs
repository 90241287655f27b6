//! Robin function on the unit disk against the closed form `ln R − ln(1 − |z|²)`.

use lake_vortex::geometry::{build_grid, compute_green, Shape};

fn main() -> lake_vortex::Result<()> {
    for spacing in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let grid = build_grid(Shape::unit_disk(), spacing)?;
        let sources: Vec<_> = [0.0, 0.2, 0.4, 0.6].iter().map(|&x| [x, 0.1]).collect();
        let green = compute_green(&grid, &sources)?;
        let r = green.r_enclosing;
        print!("h = 1/{:<3}", (1.0 / spacing).round());
        for (z, g) in sources.iter().zip(&green.robin) {
            let exact = r.ln() - (1.0 - z[0] * z[0] - z[1] * z[1]).ln();
            print!("  g({:.1},{:.1}) err {:.2e}", z[0], z[1], (g - exact).abs());
        }
        println!("  Gbar(z0,z1) = {:.6}", green.interaction[0][1]);
    }
    Ok(())
}
