//! Periodic cell problem, permeability, porosity and the interface-depth rule.

use std::sync::Arc;

use crate::error::{IcddError, Result};
use crate::fem::{assemble_cell_problem, FemConfig, NodalField};
use crate::mesh::{build_perforated_mesh, ObstacleLattice};

/// Default elements per cell side. 80 keeps the obstacle edges of both
/// `s = 0.8` and `s = 0.6` on grid lines.
pub const DEFAULT_CELL_RESOLUTION: usize = 80;

/// Coefficients of the porosity fit `d(t) = c2 t^2 + c1 t + c0`.
pub const DELTA_FIT: [f64; 3] = [0.0344, 0.0255, 0.3847];

#[derive(Debug, Clone)]
pub struct CellSolution {
    /// `w[i]` solves the cell problem forced by `e_i` (pressure in slot 2).
    pub w: [NodalField; 2],
    /// Dimensionless permeability `K_ij = int w_ij`.
    pub permeability: [[f64; 2]; 2],
    /// Fluid area fraction of the unit cell.
    pub porosity: f64,
    pub side_fraction: f64,
}

impl CellSolution {
    /// Isotropic part `(K_11 + K_22) / 2`.
    pub fn k_hat(&self) -> f64 {
        0.5 * (self.permeability[0][0] + self.permeability[1][1])
    }

    /// `K^-1`.
    pub fn inverse_permeability(&self) -> [[f64; 2]; 2] {
        let k = self.permeability;
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        [[k[1][1] / det, -k[0][1] / det], [-k[1][0] / det, k[0][0] / det]]
    }
}

/// Solves both directions of the cell problem on a `n_per_cell` square grid.
///
/// Only the obstacle fraction of `obstacle` matters; the cell is the unit
/// square. Both directions share one factorization.
pub fn solve_cell_problem(obstacle: &ObstacleLattice, n_per_cell: usize, fem: &FemConfig) -> Result<CellSolution> {
    let cell = ObstacleLattice::unit_cell(obstacle.side_fraction)?;
    let mesh = Arc::new(build_perforated_mesh(cell.extent, cell, n_per_cell)?);
    let (s0, s1) =
        rayon::join(|| assemble_cell_problem(mesh.clone(), 0, fem), || assemble_cell_problem(mesh.clone(), 1, fem));
    let (s0, s1) = (s0?, s1?);
    let lu = s0.factorize()?;
    let (x0, x1) = rayon::join(|| lu.solve(&s0.rhs), || lu.solve(&s1.rhs));
    let w = [s0.to_field(&x0?, &[]), s1.to_field(&x1?, &[])];
    let mut k = [[0.0; 2]; 2];
    for i in 0..2 {
        let int = w[i].integrate();
        k[i] = [int[0], int[1]];
    }
    Ok(CellSolution { w, permeability: k, porosity: fluid_fraction(&mesh), side_fraction: obstacle.side_fraction })
}

/// Active element count over the full grid; exact for aligned obstacles.
fn fluid_fraction(mesh: &crate::mesh::StructuredMesh) -> f64 {
    mesh.elements().len() as f64 / (mesh.nx() * mesh.ny()) as f64
}

/// `K = l^2 K_hat` in m^2.
pub fn permeability_dimensional(k_hat: f64, cell_size: f64) -> Result<f64> {
    if !(k_hat > 0.0) || !(cell_size > 0.0) {
        return Err(IcddError::InvalidParameter(format!(
            "permeability {k_hat} and cell size {cell_size} must be positive"
        )));
    }
    Ok(cell_size * cell_size * k_hat)
}

/// Dimensionless interface depth as a function of porosity.
pub fn delta_hat(porosity: f64) -> Result<f64> {
    if !(porosity > 0.0 && porosity < 1.0) {
        return Err(IcddError::InvalidParameter(format!("porosity {porosity} not in (0, 1)")));
    }
    let [c0, c1, c2] = DELTA_FIT;
    Ok(c2 * porosity * porosity + c1 * porosity + c0)
}

/// Depth `delta* = l * delta_hat(porosity)` of the lower interface below the
/// obstacle tops.
pub fn delta_star(porosity: f64, cell_size: f64) -> Result<f64> {
    if !(cell_size > 0.0) {
        return Err(IcddError::InvalidParameter(format!("cell size {cell_size} must be positive")));
    }
    Ok(cell_size * delta_hat(porosity)?)
}
