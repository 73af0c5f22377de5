//! Pore-resolved Stokes reference on the perforated domain.

use std::io::Write;
use std::sync::Arc;

use crate::error::{IcddError, Result};
use crate::fem::{assemble_stokes, FemConfig, Lattice, NodalField};
use crate::mesh::{build_perforated_mesh, BoundaryTag, ObstacleLattice, StructuredMesh};
use crate::presets::TestCasePreset;

/// Elements per cell side of the reference runs.
pub const DEFAULT_DNS_RESOLUTION: usize = 10;

#[derive(Debug, Clone)]
pub struct DnsSolution {
    pub preset: TestCasePreset,
    pub obstacles: ObstacleLattice,
    pub n_per_cell: usize,
    pub field: NodalField,
}

/// Square obstacles of side `side_fraction * cell_size` centred in the cells
/// that tile the porous part `y < 0` of the preset domain.
pub fn porous_lattice(preset: &TestCasePreset, cell_size: f64, side_fraction: f64) -> Result<ObstacleLattice> {
    ObstacleLattice::new(cell_size, side_fraction, preset.porous_region())
}

/// Solves the preset on the perforated domain with grid size `l / n_per_cell`.
pub fn solve_dns(
    preset: &TestCasePreset,
    obstacles: ObstacleLattice,
    n_per_cell: usize,
    fem: &FemConfig,
) -> Result<DnsSolution> {
    let mesh = Arc::new(build_perforated_mesh(preset.domain, obstacles, n_per_cell)?);
    let sys = assemble_stokes(
        mesh,
        fem,
        preset.mu,
        preset.force_fn(),
        &preset.dns_conditions(),
        None,
        preset.null_mean_pressure(),
    )?;
    let x = sys.factorize()?.solve(&sys.rhs)?;
    Ok(DnsSolution { preset: *preset, obstacles, n_per_cell, field: sys.to_field(&x, &[]) })
}

impl DnsSolution {
    pub fn mesh(&self) -> &Arc<StructuredMesh> {
        self.field.lattice.mesh()
    }

    /// Value of the trivially extended fields: the solution in the fluid,
    /// zero inside obstacles. `None` outside the domain.
    pub fn eval_extended(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        let d = self.preset.domain;
        let eps = 1e-12 * (d.width() + d.height());
        if x < d.x_min - eps || x > d.x_max + eps || y < d.y_min - eps || y > d.y_max + eps {
            return None;
        }
        Some(self.field.eval(x, y).unwrap_or([0.0; 3]))
    }

    /// Largest velocity magnitude on obstacle boundaries.
    pub fn obstacle_slip(&self) -> f64 {
        self.field
            .lattice
            .tag_nodes(BoundaryTag::Obstacle)
            .iter()
            .map(|&n| self.field.values[n][0].hypot(self.field.values[n][1]))
            .fold(0.0, f64::max)
    }

    /// `(x, |u|, u1, u2, p)` at the lattice nodes on grid line `y`.
    pub fn line_profile(&self, y: f64) -> Result<Vec<[f64; 5]>> {
        let mesh = self.mesh();
        let row = mesh.snap_row(y)?;
        let lat = &self.field.lattice;
        let k = lat.order();
        let mut out = vec![];
        for i in 0..lat.extent().0 {
            if let Some(n) = lat.node_at(i, k * row) {
                let v = self.field.values[n];
                out.push([lat.coords()[n][0], v[0].hypot(v[1]), v[0], v[1], v[2]]);
            }
        }
        Ok(out)
    }

    /// Mean velocity magnitude along grid line `y`, with the trivial
    /// extension (zero) across obstacles.
    pub fn mean_speed(&self, y: f64) -> Result<f64> {
        let row = self.mesh().snap_row(y)?;
        let ys = self.mesh().ys()[row];
        let (gp, gw) = crate::fem::gauss_legendre(self.field.lattice.order() + 2);
        let xs = self.mesh().xs();
        let mut s = 0.0;
        for w in xs.windows(2) {
            for (t, wt) in gp.iter().zip(&gw) {
                let x = w[0] + t * (w[1] - w[0]);
                let v = self.eval_extended(x, ys).unwrap_or([0.0; 3]);
                s += wt * (w[1] - w[0]) * v[0].hypot(v[1]);
            }
        }
        Ok(s / (xs[xs.len() - 1] - xs[0]))
    }

    /// CSV with columns `x,y,u1,u2,p`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.field.write_csv(w)
    }

    pub fn write_vtk<W: Write>(&self, w: W) -> Result<()> {
        self.field.write_vtk(w)
    }
}

/// Nodal trivial extension onto `full`, a mesh of the whole domain on the
/// same grid. Nodes strictly inside obstacles get zero.
pub fn trivial_extension(solution: &DnsSolution, full: Arc<StructuredMesh>) -> Result<NodalField> {
    let dns = solution.mesh();
    let same = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(p, q)| p.to_bits() == q.to_bits());
    if !same(dns.xs(), full.xs()) || !same(dns.ys(), full.ys()) {
        return Err(IcddError::NonConformal("full mesh grid differs from the pore-resolved grid".into()));
    }
    let lat = Arc::new(Lattice::new(full, solution.field.lattice.order()));
    let src = &solution.field.lattice;
    let values = (0..lat.len())
        .map(|n| {
            let (i, j) = lat.lattice_index(n);
            src.node_at(i, j).map_or([0.0; 3], |m| solution.field.values[m])
        })
        .collect();
    Ok(NodalField { lattice: lat, values })
}
