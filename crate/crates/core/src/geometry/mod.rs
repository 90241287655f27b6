//! Domains, grids, background fields and harmonic projection data.

mod background;
mod green;
mod grid;
mod shape;

pub use background::{check_background, Background, BackgroundFields, Bump, Depth, SampledTable};
pub use green::{boundary_data, compute_green, disk_green_regular, GreenCache, GreenSolver};
pub use grid::{build_grid, build_grid_with, harmonic, Arm, DomainGrid, GridSpec, Neighbor, NodeKind, Refinement, Stencil};
pub use shape::{Point, Shape};
