//! Strict extrema of `q²/b` for a depth with two bumps and a saddle between them.

use lake_vortex::geometry::{build_grid, Background, Bump, Depth, Shape};
use lake_vortex::runner::{describe, list_extrema};

fn main() -> lake_vortex::Result<()> {
    let background = Background::ConstantStream {
        stream: 1.0,
        depth: Depth::Bumps {
            base: 1.0,
            bumps: vec![
                Bump { center: [-0.4, 0.0], amplitude: 1.0, width: 0.2 },
                Bump { center: [0.4, 0.1], amplitude: 0.6, width: 0.25 },
            ],
        },
    };
    let shape = Shape::unit_disk();
    let grid = build_grid(shape, 1.0 / 32.0)?;
    let report = list_extrema(&background, &grid);
    for c in &report.candidates {
        println!("{}", describe(c, &shape));
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
