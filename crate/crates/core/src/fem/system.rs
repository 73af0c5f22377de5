use std::collections::HashMap;
use std::sync::Arc;

use super::basis::ElementTables;
use super::bc::VectorFn;
use super::field::NodalField;
use super::lattice::Lattice;
use super::FemConfig;
use crate::error::{IcddError, Result};
use crate::linalg::{factorize_bordered_with, factorize_with, CsrPattern, Factorization, Pivoting, SparseMatrix};
use crate::mesh::BoundaryEdge;

/// Role of one nodal unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dof {
    /// Interior unknown with its index.
    Free(usize),
    /// Column of the interface coupling block.
    Interface(usize),
    /// Eliminated Dirichlet value.
    Fixed(f64),
}

/// Numbering of interior and interface unknowns.
///
/// Interior unknowns are ordered `[velocity; pressure; multiplier]`.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub velocity: Vec<[Dof; 2]>,
    pub pressure: Vec<Dof>,
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub multiplier: Option<usize>,
    /// `(node, component)` of each interface unknown; component 2 is pressure.
    pub interface: Vec<(usize, usize)>,
}

impl DofLayout {
    pub fn n_interior(&self) -> usize {
        self.n_velocity + self.n_pressure + usize::from(self.multiplier.is_some())
    }

    pub fn n_interface(&self) -> usize {
        self.interface.len()
    }

    pub fn dof(&self, node: usize, comp: usize) -> Dof {
        if comp < 2 {
            self.velocity[node][comp]
        } else {
            self.pressure[node]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mark {
    Free,
    Interface,
    Fixed(f64),
}

pub(crate) struct LayoutBuilder {
    vel: Vec<[Mark; 2]>,
    pres: Vec<Mark>,
    master: Vec<usize>,
}

impl LayoutBuilder {
    pub fn new(n: usize) -> Self {
        LayoutBuilder { vel: vec![[Mark::Free; 2]; n], pres: vec![Mark::Free; n], master: (0..n).collect() }
    }

    pub fn fix(&mut self, node: usize, comp: usize, value: f64) {
        if comp < 2 {
            self.vel[node][comp] = Mark::Fixed(value);
        } else {
            self.pres[node] = Mark::Fixed(value);
        }
    }

    pub fn set_master(&mut self, node: usize, master: usize) {
        self.master[node] = master;
    }

    fn mark(&self, node: usize, comp: usize) -> Mark {
        if comp < 2 {
            self.vel[node][comp]
        } else {
            self.pres[node]
        }
    }

    /// Interface candidates already fixed by a wall condition are dropped.
    pub fn build(mut self, candidates: &[(usize, usize)], multiplier: bool) -> DofLayout {
        let mut interface = vec![];
        for &(n, c) in candidates {
            if self.mark(n, c) == Mark::Free {
                if c < 2 {
                    self.vel[n][c] = Mark::Interface;
                } else {
                    self.pres[n] = Mark::Interface;
                }
                interface.push((n, c));
            }
        }
        let iface_index: HashMap<(usize, usize), usize> =
            interface.iter().enumerate().map(|(i, &key)| (key, i)).collect();
        let n = self.vel.len();
        let mut velocity = vec![[Dof::Fixed(0.0); 2]; n];
        let mut pressure = vec![Dof::Fixed(0.0); n];
        let mut next = 0;
        let resolve = |m: Mark, key: (usize, usize), next: &mut usize| match m {
            Mark::Free => {
                *next += 1;
                Dof::Free(*next - 1)
            }
            Mark::Interface => Dof::Interface(iface_index[&key]),
            Mark::Fixed(v) => Dof::Fixed(v),
        };
        for node in 0..n {
            if self.master[node] == node {
                for c in 0..2 {
                    velocity[node][c] = resolve(self.vel[node][c], (node, c), &mut next);
                }
            }
        }
        let n_velocity = next;
        for node in 0..n {
            if self.master[node] == node {
                pressure[node] = resolve(self.pres[node], (node, 2), &mut next);
            }
        }
        let n_pressure = next - n_velocity;
        for node in 0..n {
            let m = self.master[node];
            if m != node {
                velocity[node] = velocity[m];
                pressure[node] = pressure[m];
            }
        }
        let multiplier = multiplier.then_some(next);
        DofLayout { velocity, pressure, n_velocity, n_pressure, multiplier, interface }
    }
}

/// Assembled subdomain problem `A x + A_gamma g = F`.
///
/// `matrix` is the full interior operator `[[A, B^T], [B, C]]` (plus the
/// pressure multiplier row when present); `a_gamma` couples interior rows to
/// the interface unknowns; `rhs` includes the Dirichlet lifts.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub lattice: Arc<Lattice>,
    pub layout: DofLayout,
    pub matrix: SparseMatrix,
    pub a_gamma: SparseMatrix,
    pub rhs: Vec<f64>,
}

impl SaddleSystem {
    pub fn n_interior(&self) -> usize {
        self.layout.n_interior()
    }

    pub fn n_interface(&self) -> usize {
        self.layout.n_interface()
    }

    fn ranges(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let nv = self.layout.n_velocity;
        (0..nv, nv..nv + self.layout.n_pressure)
    }

    /// Velocity block.
    pub fn block_a(&self) -> SparseMatrix {
        let (v, _) = self.ranges();
        self.matrix.submatrix(v.clone(), v)
    }

    /// Pressure rows, velocity columns.
    pub fn block_b(&self) -> SparseMatrix {
        let (v, p) = self.ranges();
        self.matrix.submatrix(p, v)
    }

    /// Velocity rows, pressure columns.
    pub fn block_bt(&self) -> SparseMatrix {
        let (v, p) = self.ranges();
        self.matrix.submatrix(v, p)
    }

    /// Pressure stabilization block.
    pub fn block_c(&self) -> SparseMatrix {
        let (_, p) = self.ranges();
        self.matrix.submatrix(p.clone(), p)
    }

    /// Factorizes the interior operator. A pressure multiplier is handled as
    /// a border so the dense constraint row stays out of the sparse factors.
    /// Symmetric quasi-definite systems use signed `LDL^T`.
    pub fn factorize(&self) -> Result<Factorization> {
        let signs = self.pivot_signs();
        let pivoting = signs.as_deref().map_or(Pivoting::Partial, Pivoting::Signs);
        match self.layout.multiplier {
            Some(_) if self.layout.n_pressure > 0 => {
                factorize_bordered_with(&self.matrix, self.layout.n_velocity, pivoting)
            }
            _ => factorize_with(&self.matrix, pivoting),
        }
    }

    /// `+1` per velocity and `-1` per pressure unknown when the operator is
    /// symmetric with a positive velocity and negative pressure diagonal.
    fn pivot_signs(&self) -> Option<Vec<i8>> {
        let (v, p) = self.ranges();
        let n = p.end;
        if n == 0 || self.matrix.asymmetry() > 1e-14 * self.matrix.max_abs() {
            return None;
        }
        let diag_ok = (0..n).all(|i| {
            let d = self.matrix.get(i, i);
            if v.contains(&i) {
                d > 0.0
            } else {
                d < 0.0
            }
        });
        diag_ok.then(|| (0..n).map(|i| if v.contains(&i) { 1 } else { -1 }).collect())
    }

    /// `A x + A_gamma g - F`.
    pub fn residual(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let mut r = self.matrix.mul_vec(x);
        self.a_gamma.mul_vec_add(1.0, g, &mut r);
        for (ri, fi) in r.iter_mut().zip(&self.rhs) {
            *ri -= fi;
        }
        r
    }

    /// Nodal field from interior and interface values.
    pub fn to_field(&self, x: &[f64], g: &[f64]) -> NodalField {
        let lay = &self.layout;
        let val = |d: Dof| match d {
            Dof::Free(i) => x[i],
            Dof::Interface(i) => g[i],
            Dof::Fixed(v) => v,
        };
        let values = (0..self.lattice.len())
            .map(|n| [val(lay.velocity[n][0]), val(lay.velocity[n][1]), val(lay.pressure[n])])
            .collect();
        NodalField { lattice: self.lattice.clone(), values }
    }

    /// Interior and interface vectors holding the nodal values of `field`;
    /// the multiplier is set to zero.
    pub fn split_field(&self, field: &NodalField) -> (Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; self.n_interior()];
        for n in 0..self.lattice.len() {
            for c in 0..3 {
                if let Dof::Free(i) = self.layout.dof(n, c) {
                    x[i] = field.values[n][c];
                }
            }
        }
        let g = self.layout.interface.iter().map(|&(n, c)| field.values[n][c]).collect();
        (x, g)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Kernel {
    /// Stabilized Stokes with viscosity `mu` and coefficient `gamma`.
    Stokes { mu: f64, gamma: f64 },
    /// Stabilized mixed Darcy with resistance `lambda = mu / K`.
    Darcy { lambda: f64 },
}

fn element_pattern(lattice: &Lattice, layout: &DofLayout) -> (CsrPattern, CsrPattern) {
    let nn = lattice.len();
    let mut adj: Vec<Vec<usize>> = vec![vec![]; nn];
    for e in 0..lattice.mesh().elements().len() {
        let nodes = lattice.element_nodes(e);
        for &a in nodes {
            adj[a].extend_from_slice(nodes);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let ni = layout.n_interior();
    let mut rows: Vec<Vec<usize>> = vec![vec![]; ni];
    let mut irows: Vec<Vec<usize>> = vec![vec![]; ni];
    for n in 0..nn {
        for rc in 0..3 {
            let Dof::Free(r) = layout.dof(n, rc) else { continue };
            for &m in &adj[n] {
                for cc in 0..3 {
                    // velocity components do not couple with each other
                    if rc < 2 && cc < 2 && rc != cc {
                        continue;
                    }
                    match layout.dof(m, cc) {
                        Dof::Free(c) => rows[r].push(c),
                        Dof::Interface(g) => irows[r].push(g),
                        Dof::Fixed(_) => {}
                    }
                }
            }
            if let (Some(mu), 2) = (layout.multiplier, rc) {
                rows[r].push(mu);
                rows[mu].push(r);
            }
        }
    }
    if let Some(mu) = layout.multiplier {
        rows[mu].push(mu);
        for n in 0..nn {
            if let Dof::Interface(g) = layout.pressure[n] {
                irows[mu].push(g);
            }
        }
    }
    (CsrPattern::from_rows(ni, rows), CsrPattern::from_rows(layout.n_interface(), irows))
}

pub(crate) fn assemble(
    lattice: Arc<Lattice>,
    layout: DofLayout,
    config: &FemConfig,
    kernel: Kernel,
    force: Option<&VectorFn>,
    tractions: &[(BoundaryEdge, VectorFn)],
) -> Result<SaddleSystem> {
    let (pat, ipat) = element_pattern(&lattice, &layout);
    let mut matrix = pat.into_matrix();
    let mut a_gamma = ipat.into_matrix();
    let mut rhs = vec![0.0; layout.n_interior()];
    let mesh = lattice.mesh().clone();
    let nb = lattice.nodes_per_element();
    let has_mult = layout.multiplier.is_some();
    let nl = 3 * nb + usize::from(has_mult);
    let mut tables: HashMap<(u64, u64), ElementTables> = HashMap::new();
    let mut aloc = vec![0.0; nl * nl];
    let mut bloc = vec![0.0; nl];
    let mut dofs = vec![Dof::Fixed(0.0); nl];

    let scatter = |dofs: &[Dof],
                   aloc: &[f64],
                   bloc: &[f64],
                   matrix: &mut SparseMatrix,
                   a_gamma: &mut SparseMatrix,
                   rhs: &mut [f64]| {
        for i in 0..nl {
            let Dof::Free(r) = dofs[i] else { continue };
            rhs[r] += bloc[i];
            for j in 0..nl {
                let v = aloc[i * nl + j];
                if v == 0.0 {
                    continue;
                }
                match dofs[j] {
                    Dof::Free(c) => matrix.add_at(r, c, v),
                    Dof::Interface(g) => a_gamma.add_at(r, g, v),
                    Dof::Fixed(val) => rhs[r] -= v * val,
                }
            }
        }
    };

    for e in 0..mesh.elements().len() {
        let b = mesh.element_bounds(e);
        let (hx, hy) = (b.width(), b.height());
        let t = tables
            .entry((hx.to_bits(), hy.to_bits()))
            .or_insert_with(|| ElementTables::new(config.order, config.quad_points, hx, hy));
        aloc.iter_mut().for_each(|v| *v = 0.0);
        bloc.iter_mut().for_each(|v| *v = 0.0);
        let nodes = lattice.element_nodes(e);
        for (a, &n) in nodes.iter().enumerate() {
            dofs[2 * a] = layout.velocity[n][0];
            dofs[2 * a + 1] = layout.velocity[n][1];
            dofs[2 * nb + a] = layout.pressure[n];
        }
        if let Some(m) = layout.multiplier {
            dofs[3 * nb] = Dof::Free(m);
        }
        let p = 2 * nb;
        // coefficient of (f, grad q) in the pressure rows
        let rhs_div = match kernel {
            Kernel::Stokes { mu, gamma } => {
                let h = hx.max(hy);
                let tau = gamma * h * h / mu;
                for i in 0..nb {
                    for j in 0..nb {
                        let k = i * nb + j;
                        for c in 0..2 {
                            aloc[(2 * i + c) * nl + 2 * j + c] += mu * t.stiffness[k];
                            aloc[(2 * i + c) * nl + p + j] -= t.grad[c][j * nb + i];
                            aloc[(p + i) * nl + 2 * j + c] += -t.grad[c][k] + tau * mu * t.lap[c][k];
                        }
                        aloc[(p + i) * nl + p + j] -= tau * t.stiffness[k];
                    }
                }
                tau
            }
            Kernel::Darcy { lambda } => {
                for i in 0..nb {
                    for j in 0..nb {
                        let k = i * nb + j;
                        for c in 0..2 {
                            aloc[(2 * i + c) * nl + 2 * j + c] += lambda * t.mass[k];
                            aloc[(2 * i + c) * nl + p + j] += t.grad[c][k];
                            aloc[(p + i) * nl + 2 * j + c] += t.grad[c][j * nb + i];
                        }
                        aloc[(p + i) * nl + p + j] -= t.stiffness[k] / lambda;
                    }
                }
                1.0 / lambda
            }
        };
        if has_mult {
            for i in 0..nb {
                aloc[(p + i) * nl + 3 * nb] += t.load[i];
                aloc[3 * nb * nl + p + i] += t.load[i];
            }
        }
        if let Some(f) = force {
            for (xi, w, phi) in &t.quad {
                let (x, y) = (b.x_min + xi[0] * hx, b.y_min + xi[1] * hy);
                let fv = f(x, y);
                let w = w * hx * hy;
                for a in 0..nb {
                    bloc[2 * a] += w * fv[0] * phi[a][0];
                    bloc[2 * a + 1] += w * fv[1] * phi[a][0];
                    bloc[p + a] -= rhs_div * w * (fv[0] * phi[a][1] / hx + fv[1] * phi[a][2] / hy);
                }
            }
        }
        scatter(&dofs, &aloc, &bloc, &mut matrix, &mut a_gamma, &mut rhs);
    }

    let (gp, gw) = super::basis::gauss_legendre(config.quad_points + 1);
    for (edge, t) in tractions {
        let b = mesh.element_bounds(edge.element);
        let nodes = lattice.element_nodes(edge.element);
        bloc.iter_mut().for_each(|v| *v = 0.0);
        aloc.iter_mut().for_each(|v| *v = 0.0);
        for (a, &n) in nodes.iter().enumerate() {
            dofs[2 * a] = layout.velocity[n][0];
            dofs[2 * a + 1] = layout.velocity[n][1];
            dofs[2 * nb + a] = layout.pressure[n];
        }
        if let Some(m) = layout.multiplier {
            dofs[3 * nb] = Dof::Free(m);
        }
        use crate::mesh::Side;
        let len = match edge.side {
            Side::Bottom | Side::Top => b.width(),
            Side::Left | Side::Right => b.height(),
        };
        for (s, w) in gp.iter().zip(&gw) {
            let xi = match edge.side {
                Side::Bottom => [*s, 0.0],
                Side::Top => [*s, 1.0],
                Side::Left => [0.0, *s],
                Side::Right => [1.0, *s],
            };
            let (x, y) = (b.x_min + xi[0] * b.width(), b.y_min + xi[1] * b.height());
            let tv = t(x, y);
            let phi = lattice.basis_at(xi);
            for a in 0..nb {
                bloc[2 * a] += w * len * tv[0] * phi[a][0];
                bloc[2 * a + 1] += w * len * tv[1] * phi[a][0];
            }
        }
        scatter(&dofs, &aloc, &bloc, &mut matrix, &mut a_gamma, &mut rhs);
    }

    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(IcddError::InvalidParameter("non-finite data in assembled right-hand side".into()));
    }
    Ok(SaddleSystem { lattice, layout, matrix, a_gamma, rhs })
}
