use std::f64::consts::PI;

use super::grid::DomainGrid;
use super::shape::Point;
use crate::error::{Error, Result};
use crate::sparse::LuFactor;

/// Dirichlet data of the regular part: `(1/2π) ln(1/|x − z|)`.
pub fn boundary_data(x: Point, z: Point) -> f64 {
    -(x[0] - z[0]).hypot(x[1] - z[1]).ln() / (2.0 * PI)
}

/// Factorized discrete Laplacian, reused for every source.
pub struct GreenSolver<'g> {
    grid: &'g DomainGrid,
    faces: Vec<[f64; 4]>,
    lu: LuFactor,
}

impl<'g> GreenSolver<'g> {
    pub fn new(grid: &'g DomainGrid) -> Result<Self> {
        let ones = vec![1.0; grid.node_count()];
        let faces = grid.face_coefficients(&ones);
        let lu = grid.diffusion_matrix(&faces, 1.0, None).to_csc()?.lu()?;
        Ok(Self { grid, faces, lu })
    }

    pub fn grid(&self) -> &DomainGrid {
        self.grid
    }

    pub fn check_source(&self, z: Point) -> Result<()> {
        let distance = self.grid.shape.distance_to_boundary(z);
        let minimum = 2.0 * self.grid.local_spacing(z);
        if distance < minimum {
            return Err(Error::SourceNearBoundary { x: z[0], y: z[1], distance, minimum });
        }
        Ok(())
    }

    fn rhs(&self, z: Point) -> Vec<f64> {
        self.grid.dirichlet_rhs(&self.faces, &|x| boundary_data(x, z))
    }

    /// Nodal `h(·, z)`; non-interior nodes carry the boundary data.
    pub fn h_field(&self, z: Point) -> Result<Vec<f64>> {
        self.check_source(z)?;
        let sol = self.lu.solve(&self.rhs(z))?;
        Ok(self.grid.scatter(&sol, &|x| boundary_data(x, z)))
    }

    /// `g(z, z) = ln R + 2π h(z, z)`.
    pub fn robin(&self, z: Point) -> Result<f64> {
        let h = self.h_field(z)?;
        Ok(self.grid.r_enclosing.ln() + 2.0 * PI * self.grid.interpolate(&h, z))
    }

    pub fn cache(&self, sources: &[Point]) -> Result<GreenCache> {
        for &z in sources {
            self.check_source(z)?;
        }
        let rhs: Vec<Vec<f64>> = sources.iter().map(|&z| self.rhs(z)).collect();
        let sols = self.lu.solve_many(&rhs)?;
        let h_fields: Vec<Vec<f64>> = sols
            .iter()
            .zip(sources)
            .map(|(s, &z)| self.grid.scatter(s, &|x| boundary_data(x, z)))
            .collect();
        let ln_r = self.grid.r_enclosing.ln();
        let robin = sources
            .iter()
            .zip(&h_fields)
            .map(|(&z, h)| ln_r + 2.0 * PI * self.grid.interpolate(h, z))
            .collect();
        let m = sources.len();
        let mut interaction = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    let zi = sources[i];
                    let zj = sources[j];
                    let g = ln_r + 2.0 * PI * self.grid.interpolate(&h_fields[j], zi);
                    interaction[i][j] = (self.grid.r_enclosing / (zi[0] - zj[0]).hypot(zi[1] - zj[1])).ln() - g;
                }
            }
        }
        Ok(GreenCache { sources: sources.to_vec(), h_fields, robin, interaction, r_enclosing: self.grid.r_enclosing })
    }
}

/// Harmonic projection data for a set of sources.
#[derive(Debug, Clone)]
pub struct GreenCache {
    pub sources: Vec<Point>,
    pub h_fields: Vec<Vec<f64>>,
    /// `g(z_i, z_i)`
    pub robin: Vec<f64>,
    /// `Ḡ(z_i, z_j)`; the diagonal is unused and left at zero.
    pub interaction: Vec<Vec<f64>>,
    pub r_enclosing: f64,
}

impl GreenCache {
    /// Nodal `g(·, z_i) = ln R + 2π h(·, z_i)`.
    pub fn g_field(&self, i: usize) -> Vec<f64> {
        let ln_r = self.r_enclosing.ln();
        self.h_fields[i].iter().map(|h| ln_r + 2.0 * PI * h).collect()
    }

    pub fn g_at(&self, grid: &DomainGrid, i: usize, x: Point) -> f64 {
        self.r_enclosing.ln() + 2.0 * PI * grid.interpolate(&self.h_fields[i], x)
    }

    pub fn gbar_at(&self, grid: &DomainGrid, i: usize, x: Point) -> f64 {
        let z = self.sources[i];
        (self.r_enclosing / (x[0] - z[0]).hypot(x[1] - z[1])).ln() - self.g_at(grid, i, x)
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

pub fn compute_green(grid: &DomainGrid, sources: &[Point]) -> Result<GreenCache> {
    GreenSolver::new(grid)?.cache(sources)
}

/// `g(x, z)` for the unit disk by the method of images.
pub fn disk_green_regular(x: Point, z: Point, r_enclosing: f64) -> f64 {
    let rz = z[0].hypot(z[1]);
    if rz == 0.0 {
        return r_enclosing.ln();
    }
    let star = [z[0] / (rz * rz), z[1] / (rz * rz)];
    r_enclosing.ln() - (rz * (x[0] - star[0]).hypot(x[1] - star[1])).ln()
}
