use std::io::Write;
use std::sync::Arc;

use super::lattice::Lattice;
use crate::error::Result;

/// Velocity and pressure nodal values `[u1, u2, p]` on a lattice.
#[derive(Debug, Clone)]
pub struct NodalField {
    pub lattice: Arc<Lattice>,
    pub values: Vec<[f64; 3]>,
}

impl NodalField {
    pub fn zeros(lattice: Arc<Lattice>) -> Self {
        let n = lattice.len();
        NodalField { lattice, values: vec![[0.0; 3]; n] }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(lattice: Arc<Lattice>, f: impl Fn(f64, f64) -> [f64; 3]) -> Self {
        let values = lattice.coords().iter().map(|p| f(p[0], p[1])).collect();
        NodalField { lattice, values }
    }

    /// Value inside element `e` at local coordinates `xi`.
    pub fn eval_local(&self, e: usize, xi: [f64; 2]) -> [f64; 3] {
        let phi = self.lattice.basis_at(xi);
        let nodes = self.lattice.element_nodes(e);
        let mut out = [0.0; 3];
        for (a, &n) in nodes.iter().enumerate() {
            for c in 0..3 {
                out[c] += phi[a][0] * self.values[n][c];
            }
        }
        out
    }

    /// Gradient of the velocity components inside element `e`.
    pub fn grad_local(&self, e: usize, xi: [f64; 2]) -> [[f64; 2]; 3] {
        let phi = self.lattice.basis_at(xi);
        let b = self.lattice.mesh().element_bounds(e);
        let (hx, hy) = (b.width(), b.height());
        let nodes = self.lattice.element_nodes(e);
        let mut out = [[0.0; 2]; 3];
        for (a, &n) in nodes.iter().enumerate() {
            for c in 0..3 {
                out[c][0] += phi[a][1] / hx * self.values[n][c];
                out[c][1] += phi[a][2] / hy * self.values[n][c];
            }
        }
        out
    }

    /// Integral of each component over the mesh.
    pub fn integrate(&self) -> [f64; 3] {
        let k = self.lattice.order();
        let (gp, gw) = super::basis::gauss_legendre(k + 1);
        let mut quad = vec![];
        for (j, eta) in gp.iter().enumerate() {
            for (i, xi) in gp.iter().enumerate() {
                quad.push((gw[i] * gw[j], self.lattice.basis_at([*xi, *eta])));
            }
        }
        let mesh = self.lattice.mesh();
        let mut out = [0.0; 3];
        for e in 0..mesh.elements().len() {
            let area = mesh.element_area(e);
            let nodes = self.lattice.element_nodes(e);
            for (w, phi) in &quad {
                for (a, &n) in nodes.iter().enumerate() {
                    for c in 0..3 {
                        out[c] += w * area * phi[a][0] * self.values[n][c];
                    }
                }
            }
        }
        out
    }

    /// Point evaluation; `None` outside the mesh or inside a hole.
    pub fn eval(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        let (e, xi) = self.lattice.mesh().locate(x, y)?;
        Some(self.eval_local(e, xi))
    }

    pub fn velocity_at(&self, n: usize) -> [f64; 2] {
        [self.values[n][0], self.values[n][1]]
    }

    /// Adds `c` to the pressure everywhere.
    pub fn shift_pressure(&mut self, c: f64) {
        for v in &mut self.values {
            v[2] += c;
        }
    }

    /// CSV with columns `x,y,u1,u2,p`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,u1,u2,p")?;
        for (p, v) in self.lattice.coords().iter().zip(&self.values) {
            writeln!(w, "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}", p[0], p[1], v[0], v[1], v[2])?;
        }
        Ok(())
    }

    /// Legacy VTK with bilinear cells (vertex values only) and point data.
    pub fn write_vtk<W: Write>(&self, mut w: W) -> Result<()> {
        let mesh = self.lattice.mesh();
        let n = mesh.nodes().len();
        let mut values = Vec::with_capacity(n);
        for p in mesh.nodes() {
            values.push(self.eval(p[0], p[1]).unwrap_or([0.0; 3]));
        }
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "velocity and pressure")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {n} double")?;
        for p in mesh.nodes() {
            writeln!(w, "{:.8e} {:.8e} 0", p[0], p[1])?;
        }
        let ne = mesh.elements().len();
        writeln!(w, "CELLS {ne} {}", 5 * ne)?;
        for e in mesh.elements() {
            writeln!(w, "4 {} {} {} {}", e[0], e[1], e[2], e[3])?;
        }
        writeln!(w, "CELL_TYPES {ne}")?;
        for _ in 0..ne {
            writeln!(w, "9")?;
        }
        writeln!(w, "POINT_DATA {n}")?;
        writeln!(w, "VECTORS velocity double")?;
        for v in &values {
            writeln!(w, "{:.8e} {:.8e} 0", v[0], v[1])?;
        }
        writeln!(w, "SCALARS pressure double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in &values {
            writeln!(w, "{:.8e}", v[2])?;
        }
        Ok(())
    }
}
