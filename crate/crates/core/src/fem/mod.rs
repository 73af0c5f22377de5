//! Stabilized equal-order finite elements for Stokes, Darcy and the periodic
//! cell problem.
//!
//! Stokes uses a pressure-stabilized Galerkin form
//!
//! ```text
//! mu (grad u, grad v) - (p, div v) = (f, v) + <t, v>
//! -(q, div u) - tau (grad p - mu lap u - f, grad q) = 0,   tau = gamma h^2 / mu
//! ```
//!
//! which on bilinear rectangles reduces to a pressure Laplacian. Darcy uses the
//! symmetric adjoint-consistent form
//!
//! ```text
//! lambda (u, v) + (grad p, v) = (f, v)
//! (u, grad q) - (grad p, grad q) / lambda = -(f, grad q) / lambda,   lambda = mu / K
//! ```
//!
//! with pressure data and `u . n = 0` imposed strongly.

mod basis;
mod bc;
mod field;
mod lattice;
mod system;

use std::sync::Arc;

pub use basis::{gauss_legendre, ElementTables, Lagrange1d};
pub use bc::{BoundaryCondition, BoundarySpec, ScalarFn, VectorFn};
pub use field::NodalField;
pub use lattice::Lattice;
pub use system::{Dof, DofLayout, SaddleSystem};

use system::{assemble, Kernel, LayoutBuilder};

use crate::error::{IcddError, Result};
use crate::mesh::{BoundaryEdge, BoundaryTag, InterfaceLine, Side, StructuredMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FemConfig {
    /// Polynomial order of velocity and pressure (1 or 2).
    pub order: usize,
    /// Pressure stabilization coefficient.
    pub stabilization: f64,
    /// Gauss points per direction.
    pub quad_points: usize,
}

impl Default for FemConfig {
    fn default() -> Self {
        FemConfig::new(1)
    }
}

impl FemConfig {
    pub fn new(order: usize) -> Self {
        FemConfig { order, stabilization: 0.1, quad_points: order + 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.order) {
            return Err(IcddError::InvalidParameter(format!("order {} not in {{1, 2}}", self.order)));
        }
        if !(self.stabilization > 0.0) || !self.stabilization.is_finite() {
            return Err(IcddError::InvalidParameter(format!(
                "stabilization {} must be positive for equal-order elements",
                self.stabilization
            )));
        }
        if self.quad_points == 0 {
            return Err(IcddError::InvalidParameter("quad_points must be positive".into()));
        }
        Ok(())
    }
}

fn normal_component(side: Side) -> usize {
    match side {
        Side::Bottom | Side::Top => 1,
        Side::Left | Side::Right => 0,
    }
}

fn edges(mesh: &StructuredMesh, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
    mesh.boundary_edges().iter().filter(move |e| e.tag == tag)
}

/// Lattice nodes on an interface line, re-located on this mesh.
fn interface_nodes(lattice: &Lattice, line: &InterfaceLine) -> Result<Vec<usize>> {
    let mesh = lattice.mesh();
    let row = mesh.snap_row(line.y)?;
    if mesh.ys()[row].to_bits() != line.y.to_bits() {
        return Err(IcddError::NonConformal(format!(
            "interface y = {} does not coincide with grid line y = {}",
            line.y,
            mesh.ys()[row]
        )));
    }
    Ok(lattice.line_nodes(row))
}

/// Assembles the stabilized Stokes problem on `mesh`.
///
/// Velocity on `interface` becomes interface unknowns, except where a
/// velocity condition of a wall already fixes it.
pub fn assemble_stokes(
    mesh: Arc<StructuredMesh>,
    config: &FemConfig,
    mu: f64,
    force: Option<VectorFn>,
    bc: &BoundarySpec,
    interface: Option<&InterfaceLine>,
    null_mean_pressure: bool,
) -> Result<SaddleSystem> {
    config.validate()?;
    if !(mu > 0.0) {
        return Err(IcddError::InvalidParameter(format!("viscosity {mu} must be positive")));
    }
    bc.check(&mesh)?;
    let lattice = Arc::new(Lattice::new(mesh.clone(), config.order));
    let mut lb = LayoutBuilder::new(lattice.len());
    let mut tractions = vec![];
    for (tag, cond) in bc.iter() {
        for edge in edges(&mesh, tag) {
            let side_nodes: Vec<usize> =
                lattice.side_local(edge.side).iter().map(|&a| lattice.element_nodes(edge.element)[a]).collect();
            match cond {
                BoundaryCondition::Velocity(g) => {
                    for &n in &side_nodes {
                        let p = lattice.coords()[n];
                        let v = g(p[0], p[1]);
                        lb.fix(n, 0, v[0]);
                        lb.fix(n, 1, v[1]);
                    }
                }
                BoundaryCondition::Impermeable => {
                    for &n in &side_nodes {
                        lb.fix(n, normal_component(edge.side), 0.0);
                    }
                }
                BoundaryCondition::Traction(t) => tractions.push((*edge, t.clone())),
                BoundaryCondition::Pressure(p) => {
                    let (p, nrm) = (p.clone(), edge.side.normal());
                    let t: VectorFn = Arc::new(move |x, y| {
                        let v = p(x, y);
                        [-v * nrm[0], -v * nrm[1]]
                    });
                    tractions.push((*edge, t));
                }
                BoundaryCondition::Interface => {}
            }
        }
    }
    let mut candidates = vec![];
    if let Some(line) = interface {
        for n in interface_nodes(&lattice, line)? {
            candidates.push((n, 0));
            candidates.push((n, 1));
        }
    }
    let layout = lb.build(&candidates, null_mean_pressure);
    let kernel = Kernel::Stokes { mu, gamma: config.stabilization };
    assemble(lattice, layout, config, kernel, force.as_ref(), &tractions)
}

/// Assembles the stabilized mixed Darcy problem on `mesh`.
///
/// Traction data is converted to the pressure `p = -t . n`; pressure on
/// `interface` becomes interface unknowns.
pub fn assemble_darcy(
    mesh: Arc<StructuredMesh>,
    config: &FemConfig,
    mu: f64,
    permeability: f64,
    force: Option<VectorFn>,
    bc: &BoundarySpec,
    interface: Option<&InterfaceLine>,
) -> Result<SaddleSystem> {
    config.validate()?;
    if !(mu > 0.0) {
        return Err(IcddError::InvalidParameter(format!("viscosity {mu} must be positive")));
    }
    if !(permeability > 0.0) || !permeability.is_finite() {
        return Err(IcddError::InvalidParameter(format!("permeability {permeability} must be positive")));
    }
    bc.check(&mesh)?;
    let lattice = Arc::new(Lattice::new(mesh.clone(), config.order));
    let mut lb = LayoutBuilder::new(lattice.len());
    for (tag, cond) in bc.iter() {
        for edge in edges(&mesh, tag) {
            let side_nodes: Vec<usize> =
                lattice.side_local(edge.side).iter().map(|&a| lattice.element_nodes(edge.element)[a]).collect();
            let nrm = edge.side.normal();
            let c = normal_component(edge.side);
            for &n in &side_nodes {
                let p = lattice.coords()[n];
                match cond {
                    // only the normal component is prescribed
                    BoundaryCondition::Velocity(g) => lb.fix(n, c, g(p[0], p[1])[c]),
                    BoundaryCondition::Impermeable => lb.fix(n, c, 0.0),
                    BoundaryCondition::Traction(t) => {
                        let tv = t(p[0], p[1]);
                        lb.fix(n, 2, -(tv[0] * nrm[0] + tv[1] * nrm[1]));
                    }
                    BoundaryCondition::Pressure(f) => lb.fix(n, 2, f(p[0], p[1])),
                    BoundaryCondition::Interface => {}
                }
            }
        }
    }
    let mut candidates = vec![];
    if let Some(line) = interface {
        for n in interface_nodes(&lattice, line)? {
            candidates.push((n, 2));
        }
    }
    let layout = lb.build(&candidates, false);
    let kernel = Kernel::Darcy { lambda: mu / permeability };
    assemble(lattice, layout, config, kernel, force.as_ref(), &[])
}

/// Periodic unit-cell Stokes problem with unit viscosity and force `e_i`
/// (`direction` 0 or 1), no-slip on the obstacle and zero-mean pressure.
pub fn assemble_cell_problem(mesh: Arc<StructuredMesh>, direction: usize, config: &FemConfig) -> Result<SaddleSystem> {
    config.validate()?;
    if direction > 1 {
        return Err(IcddError::InvalidParameter(format!("direction {direction} not in {{0, 1}}")));
    }
    if !mesh.boundary_edges().iter().any(|e| e.tag == BoundaryTag::Obstacle) {
        return Err(IcddError::Degenerate("cell without obstacle: periodic velocity is not determined".into()));
    }
    let lattice = Arc::new(Lattice::new(mesh.clone(), config.order));
    let (nxl, nyl) = lattice.extent();
    let (nx, ny) = (nxl - 1, nyl - 1);
    let mut lb = LayoutBuilder::new(lattice.len());
    for n in 0..lattice.len() {
        let (i, j) = lattice.lattice_index(n);
        let (mi, mj) = (i % nx, j % ny);
        let partner = |a: usize, b: usize| lattice.node_at(a, b);
        if (i == 0 && partner(nx, j).is_none()) || (j == 0 && partner(i, ny).is_none()) {
            return Err(IcddError::NonConformal(format!("periodic partner of lattice point ({i}, {j}) missing")));
        }
        let m =
            partner(mi, mj).ok_or_else(|| IcddError::NonConformal(format!("periodic image of ({i}, {j}) missing")))?;
        lb.set_master(n, m);
    }
    for n in lattice.tag_nodes(BoundaryTag::Obstacle) {
        lb.fix(n, 0, 0.0);
        lb.fix(n, 1, 0.0);
    }
    let layout = lb.build(&[], true);
    let mut e = [0.0; 2];
    e[direction] = 1.0;
    let force: VectorFn = Arc::new(move |_, _| e);
    let kernel = Kernel::Stokes { mu: 1.0, gamma: config.stabilization };
    assemble(lattice, layout, config, kernel, Some(&force), &[])
}
