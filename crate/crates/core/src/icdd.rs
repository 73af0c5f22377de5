//! Overlapping Stokes-Darcy coupling through interface controls.
//!
//! The fluid subdomain `y > y_f` carries Stokes with the velocity on `y = y_f`
//! as control `g_f`; the porous subdomain `y < 0` carries Darcy with the
//! pressure on `y = 0` as control `g_p`. With `A U + A_g g = F` the two
//! subdomain systems and `R` the selection of the opposite subdomain's trace,
//! the controls solve the interface equation
//!
//! ```text
//! S g = b,   S g = g - R u(g) + R w(g)
//! u(g) = -A^-1 A_g g,   w(g) = A^-1 A_g (R u(g) - g)
//! b = R U_F - R A^-1 A_g R U_F,   A U_F = F
//! ```
//!
//! where `w` are the dual solutions, which vanish at convergence.

use std::io::Write;
use std::sync::Arc;

use crate::error::{IcddError, Result};
use crate::fem::{assemble_darcy, assemble_stokes, Dof, FemConfig, NodalField, SaddleSystem};
use crate::linalg::{
    bicgstab, factorize, factorize_bordered, norm2, Factorization, FnOperator, KrylovConfig, SparseMatrix,
};
use crate::mesh::{
    build_rect_mesh, ensure_disjoint, extract_interface_nodes, InterfaceLine, RectDomain, StructuredMesh,
};
use crate::presets::TestCasePreset;

/// Placement of the two interfaces inside the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcddGeometry {
    pub domain: RectDomain,
    /// Height of the porous-side interface (top of the obstacle lattice).
    pub y_p: f64,
    /// Requested depth of the fluid-side interface below `y_p`.
    pub delta: f64,
    /// Element size of the shared grid.
    pub h: f64,
}

impl IcddGeometry {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(IcddError::InterfacesNotDisjoint(format!("overlap depth {} must be positive", self.delta)));
        }
        if !(self.h > 0.0) {
            return Err(IcddError::InvalidParameter(format!("element size {} must be positive", self.h)));
        }
        if !(self.y_p > self.domain.y_min && self.y_p < self.domain.y_max) {
            return Err(IcddError::InvalidGeometry(format!("interface y = {} outside the domain", self.y_p)));
        }
        Ok(())
    }
}

/// Physical data of a coupled run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    pub preset: TestCasePreset,
    /// Darcy permeability in m^2.
    pub permeability: f64,
}

/// Assembled and factorized subdomain problems with their trace maps.
pub struct IcddProblem {
    pub geometry: IcddGeometry,
    pub physics: Physics,
    pub mesh: Arc<StructuredMesh>,
    pub stokes: SaddleSystem,
    pub darcy: SaddleSystem,
    /// Fluid-side interface on the shared grid (snapped).
    pub gamma_f: InterfaceLine,
    pub gamma_p: InterfaceLine,
    /// Darcy interior index of each Stokes interface unknown.
    pub r_f: Vec<usize>,
    /// Stokes interior index of each Darcy interface unknown.
    pub r_p: Vec<usize>,
    stokes_lu: Factorization,
    darcy_lu: Factorization,
}

impl std::fmt::Debug for IcddProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IcddProblem")
            .field("geometry", &self.geometry)
            .field("y_f", &self.gamma_f.y)
            .field("stokes_dofs", &self.stokes.n_interior())
            .field("darcy_dofs", &self.darcy.n_interior())
            .field("interface", &(self.r_f.len(), self.r_p.len()))
            .finish()
    }
}

/// Index map from `from`'s interface unknowns to `to`'s interior unknowns at
/// the same coordinates.
fn trace_map(from: &SaddleSystem, to: &SaddleSystem) -> Result<Vec<usize>> {
    let mut map = Vec::with_capacity(from.n_interface());
    for &(n, c) in &from.layout.interface {
        let p = from.lattice.coords()[n];
        let m = to.lattice.find_node(p).ok_or_else(|| {
            IcddError::NonConformal(format!(
                "interface point ({}, {}) is not a node of the other subdomain",
                p[0], p[1]
            ))
        })?;
        match to.layout.dof(m, c) {
            Dof::Free(i) => map.push(i),
            other => {
                return Err(IcddError::NonConformal(format!(
                    "interface point ({}, {}) component {c} is {other:?} in the other subdomain",
                    p[0], p[1]
                )))
            }
        }
    }
    Ok(map)
}

/// Builds both subdomain systems on strips of one uniform grid and factorizes
/// them.
///
/// The fluid interface is snapped to the grid line nearest `y_p - delta`, but
/// never onto `y_p` itself: a depth below half an element still gives one row
/// of overlap.
pub fn assemble_problem(geometry: IcddGeometry, physics: Physics, fem: &FemConfig) -> Result<IcddProblem> {
    geometry.validate()?;
    fem.validate()?;
    let mesh = Arc::new(build_rect_mesh(geometry.domain, geometry.h)?);
    let gamma_p = extract_interface_nodes(&mesh, geometry.y_p)?;
    let target = (geometry.y_p - geometry.delta).max(geometry.domain.y_min);
    // y_p lies strictly inside the domain, so gamma_p.row >= 1
    let row = mesh.snap_row(target)?.min(gamma_p.row - 1);
    if row == 0 {
        return Err(IcddError::InvalidGeometry(format!(
            "fluid interface at depth {} reaches the bottom of the domain",
            geometry.delta
        )));
    }
    let gamma_f = extract_interface_nodes(&mesh, mesh.ys()[row])?;
    ensure_disjoint(&gamma_f, &gamma_p)?;
    let fluid = Arc::new(mesh.strip(gamma_f.y, geometry.domain.y_max)?);
    let porous = Arc::new(mesh.strip(geometry.domain.y_min, gamma_p.y)?);
    let preset = physics.preset;
    let (stokes, darcy) = rayon::join(
        || {
            assemble_stokes(
                fluid,
                fem,
                preset.mu,
                preset.force_fn(),
                &preset.stokes_conditions(),
                Some(&gamma_f),
                preset.null_mean_pressure(),
            )
        },
        || {
            assemble_darcy(
                porous,
                fem,
                preset.mu,
                physics.permeability,
                preset.force_fn(),
                &preset.darcy_conditions(),
                Some(&gamma_p),
            )
        },
    );
    let (stokes, darcy) = (stokes?, darcy?);
    let r_f = trace_map(&stokes, &darcy)?;
    let r_p = trace_map(&darcy, &stokes)?;
    let (slu, dlu) = rayon::join(|| stokes.factorize(), || darcy.factorize());
    Ok(IcddProblem {
        geometry,
        physics,
        mesh,
        stokes,
        darcy,
        gamma_f,
        gamma_p,
        r_f,
        r_p,
        stokes_lu: slu?,
        darcy_lu: dlu?,
    })
}

fn gather(x: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| x[i]).collect()
}

fn lifted(sys: &SaddleSystem, g: &[f64], sign: f64) -> Vec<f64> {
    let mut r = vec![0.0; sys.n_interior()];
    sys.a_gamma.mul_vec_add(sign, g, &mut r);
    r
}

/// Relative norm `|a| / |b|`, or `|a|` when `b` vanishes.
fn relative(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        a
    }
}

impl IcddProblem {
    /// Number of interface unknowns `[g_f; g_p]`.
    pub fn n_interface(&self) -> usize {
        self.r_f.len() + self.r_p.len()
    }

    /// Height of the snapped fluid interface.
    pub fn y_f(&self) -> f64 {
        self.gamma_f.y
    }

    /// Realized overlap depth.
    pub fn overlap(&self) -> f64 {
        self.gamma_p.y - self.gamma_f.y
    }

    fn split<'a>(&self, g: &'a [f64]) -> Result<(&'a [f64], &'a [f64])> {
        if g.len() != self.n_interface() {
            return Err(IcddError::DimensionMismatch { expected: self.n_interface(), got: g.len() });
        }
        Ok(g.split_at(self.r_f.len()))
    }

    /// Stokes and Darcy solves with volume data `F` and the given interface
    /// values.
    pub fn solve_subdomains(&self, g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (gf, gp) = self.split(g)?;
        let rhs = |sys: &SaddleSystem, g: &[f64]| {
            let mut r = sys.rhs.clone();
            sys.a_gamma.mul_vec_add(-1.0, g, &mut r);
            r
        };
        let (uf, up) =
            rayon::join(|| self.stokes_lu.solve(&rhs(&self.stokes, gf)), || self.darcy_lu.solve(&rhs(&self.darcy, gp)));
        Ok((uf?, up?))
    }

    /// Dual solutions `A^-1 A_g (R U - g)` for interior solutions `U`.
    pub fn dual_solutions(&self, uf: &[f64], up: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (gf, gp) = self.split(g)?;
        let df: Vec<f64> = gather(up, &self.r_f).iter().zip(gf).map(|(a, b)| a - b).collect();
        let dp: Vec<f64> = gather(uf, &self.r_p).iter().zip(gp).map(|(a, b)| a - b).collect();
        let (wf, wp) = rayon::join(
            || self.stokes_lu.solve(&lifted(&self.stokes, &df, 1.0)),
            || self.darcy_lu.solve(&lifted(&self.darcy, &dp, 1.0)),
        );
        Ok((wf?, wp?))
    }

    /// `b = R U_F - R W_F`.
    pub fn schur_rhs(&self) -> Result<Vec<f64>> {
        let (uf, up) = self.solve_subdomains(&vec![0.0; self.n_interface()])?;
        let (wf, wp) = self.dual_solutions(&uf, &up, &vec![0.0; self.n_interface()])?;
        let mut b = Vec::with_capacity(self.n_interface());
        b.extend(self.r_f.iter().map(|&i| up[i] - wp[i]));
        b.extend(self.r_p.iter().map(|&i| uf[i] - wf[i]));
        Ok(b)
    }

    /// `S g` with four subdomain solves on homogeneous volume data.
    pub fn schur_apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        let (gf, gp) = self.split(g)?;
        let (uf, up) = rayon::join(
            || self.stokes_lu.solve(&lifted(&self.stokes, gf, -1.0)),
            || self.darcy_lu.solve(&lifted(&self.darcy, gp, -1.0)),
        );
        let (uf, up) = (uf?, up?);
        let (wf, wp) = self.dual_solutions(&uf, &up, g)?;
        let mut t = Vec::with_capacity(g.len());
        t.extend(self.r_f.iter().zip(gf).map(|(&i, g)| g - up[i] + wp[i]));
        t.extend(self.r_p.iter().zip(gp).map(|(&i, g)| g - uf[i] + wf[i]));
        Ok(t)
    }

    /// Solves `S g = b` by BiCGStab from a zero initial guess.
    pub fn schur_solve(&self, b: &[f64], config: &KrylovConfig) -> Result<InterfaceSolve> {
        let op = FnOperator { n: self.n_interface(), f: |g: &[f64]| self.schur_apply(g) };
        let out = bicgstab(&op, b, config)?;
        Ok(InterfaceSolve { g: out.x, iterations: out.iterations, history: out.history, residual: out.true_residual })
    }

    fn compose(&self, uf: &[f64], up: &[f64], g: &[f64]) -> Result<CompositeSolution> {
        let (gf, gp) = self.split(g)?;
        Ok(CompositeSolution {
            stokes: self.stokes.to_field(uf, gf),
            darcy: self.darcy.to_field(up, gp),
            y_f: self.gamma_f.y,
            y_p: self.gamma_p.y,
        })
    }

    /// Interface residuals `|g_f - u_p|` and `|g_p - p_f|`, relative to the
    /// traces.
    pub fn matching_residuals(&self, uf: &[f64], up: &[f64], g: &[f64]) -> Result<[f64; 2]> {
        let (gf, gp) = self.split(g)?;
        let tf = gather(up, &self.r_f);
        let tp = gather(uf, &self.r_p);
        let df: Vec<f64> = gf.iter().zip(&tf).map(|(a, b)| a - b).collect();
        let dp: Vec<f64> = gp.iter().zip(&tp).map(|(a, b)| a - b).collect();
        Ok([relative(norm2(&df), norm2(&tf)), relative(norm2(&dp), norm2(&tp))])
    }

    /// Complete ICDD solve: interface equation, final subdomain solves and
    /// post-hoc checks.
    pub fn solve(&self, config: &KrylovConfig) -> Result<IcddSolution> {
        let b = self.schur_rhs()?;
        let iface = self.schur_solve(&b, config)?;
        let (uf, up) = self.solve_subdomains(&iface.g)?;
        let matching = self.matching_residuals(&uf, &up, &iface.g)?;
        let (wf, wp) = self.dual_solutions(&uf, &up, &iface.g)?;
        let dual = [relative(norm2(&wf), norm2(&uf)), relative(norm2(&wp), norm2(&up))];
        let composite = self.compose(&uf, &up, &iface.g)?;
        Ok(IcddSolution { composite, interface: iface, matching, dual, rhs_norm: norm2(&b) })
    }

    /// Direct solve of the coupled system
    /// `[[A, A_g], [-R, I]] [U; g] = [F; 0]`.
    pub fn monolithic_solve(&self) -> Result<MonolithicSolution> {
        let (sf, sp) = (&self.stokes, &self.darcy);
        let mult = sf.layout.multiplier;
        // unknowns: Stokes interior without multiplier, Darcy, g_f, g_p, multiplier
        let nf = sf.n_interior() - usize::from(mult.is_some());
        let (np, mf, mp) = (sp.n_interior(), self.r_f.len(), self.r_p.len());
        let off_p = nf;
        let off_gf = nf + np;
        let off_gp = off_gf + mf;
        let n = off_gp + mp + usize::from(mult.is_some());
        let fi = |i: usize| if Some(i) == mult { n - 1 } else { i };
        let mut t = Vec::with_capacity(sf.matrix.nnz() + sp.matrix.nnz() + sf.a_gamma.nnz() + sp.a_gamma.nnz());
        let mut rhs = vec![0.0; n];
        for r in 0..sf.n_interior() {
            t.extend(sf.matrix.row(r).map(|(c, v)| (fi(r), fi(c), v)));
            t.extend(sf.a_gamma.row(r).map(|(c, v)| (fi(r), off_gf + c, v)));
            rhs[fi(r)] = sf.rhs[r];
        }
        for r in 0..np {
            t.extend(sp.matrix.row(r).map(|(c, v)| (off_p + r, off_p + c, v)));
            t.extend(sp.a_gamma.row(r).map(|(c, v)| (off_p + r, off_gp + c, v)));
            rhs[off_p + r] = sp.rhs[r];
        }
        for (k, &i) in self.r_f.iter().enumerate() {
            t.push((off_gf + k, off_p + i, -1.0));
            t.push((off_gf + k, off_gf + k, 1.0));
        }
        for (k, &i) in self.r_p.iter().enumerate() {
            t.push((off_gp + k, fi(i), -1.0));
            t.push((off_gp + k, off_gp + k, 1.0));
        }
        let a = SparseMatrix::from_triplets(n, n, &t)?;
        let lu = match mult {
            Some(_) => factorize_bordered(&a, sf.layout.n_velocity)?,
            None => factorize(&a)?,
        };
        let x = lu.solve(&rhs)?;
        let uf: Vec<f64> = (0..sf.n_interior()).map(|i| x[fi(i)]).collect();
        let up = x[off_p..off_gf].to_vec();
        let g = x[off_gf..off_gp + mp].to_vec();
        let composite = self.compose(&uf, &up, &g)?;
        Ok(MonolithicSolution { composite, g, matrix: a })
    }
}

/// Result of the interface iteration.
#[derive(Debug, Clone)]
pub struct InterfaceSolve {
    /// Controls `[g_f; g_p]`.
    pub g: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
    /// True relative residual of `S g = b`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct IcddSolution {
    pub composite: CompositeSolution,
    pub interface: InterfaceSolve,
    /// Relative matching residuals on the fluid and porous interfaces.
    pub matching: [f64; 2],
    /// Dual solutions at the converged controls relative to the primal ones.
    pub dual: [f64; 2],
    pub rhs_norm: f64,
}

#[derive(Debug, Clone)]
pub struct MonolithicSolution {
    pub composite: CompositeSolution,
    pub g: Vec<f64>,
    /// The coupled matrix, with the pressure multiplier (if any) last.
    pub matrix: SparseMatrix,
}

/// Subdomain fields merged with Stokes kept on the overlap.
#[derive(Debug, Clone)]
pub struct CompositeSolution {
    pub stokes: NodalField,
    pub darcy: NodalField,
    pub y_f: f64,
    pub y_p: f64,
}

/// Which subdomain a composite value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Stokes,
    Darcy,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Stokes => "stokes",
            Provenance::Darcy => "darcy",
        }
    }
}

impl CompositeSolution {
    pub fn provenance(&self, y: f64) -> Provenance {
        if y >= self.y_f {
            Provenance::Stokes
        } else {
            Provenance::Darcy
        }
    }

    /// `[u1, u2, p]` at a point of the domain.
    pub fn eval(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        match self.provenance(y) {
            Provenance::Stokes => self.stokes.eval(x, y),
            Provenance::Darcy => self.darcy.eval(x, y),
        }
    }

    /// Nodal values on the union of both lattices, each node taken once.
    pub fn nodes(&self) -> Vec<([f64; 2], [f64; 3], Provenance)> {
        let mut out = vec![];
        for (p, v) in self.darcy.lattice.coords().iter().zip(&self.darcy.values) {
            if p[1] < self.y_f {
                out.push((*p, *v, Provenance::Darcy));
            }
        }
        for (p, v) in self.stokes.lattice.coords().iter().zip(&self.stokes.values) {
            out.push((*p, *v, Provenance::Stokes));
        }
        out
    }

    /// CSV with columns `x,y,u1,u2,p,provenance`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,u1,u2,p,provenance")?;
        for (p, v, s) in self.nodes() {
            writeln!(w, "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{}", p[0], p[1], v[0], v[1], v[2], s.name())?;
        }
        Ok(())
    }

    /// Legacy VTK point cloud with velocity, pressure and provenance.
    pub fn write_vtk<W: Write>(&self, mut w: W) -> Result<()> {
        let nodes = self.nodes();
        let n = nodes.len();
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "composite velocity and pressure")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {n} double")?;
        for (p, _, _) in &nodes {
            writeln!(w, "{:.8e} {:.8e} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {n} {}", 2 * n)?;
        for i in 0..n {
            writeln!(w, "1 {i}")?;
        }
        writeln!(w, "CELL_TYPES {n}")?;
        for _ in 0..n {
            writeln!(w, "1")?;
        }
        writeln!(w, "POINT_DATA {n}")?;
        writeln!(w, "VECTORS velocity double")?;
        for (_, v, _) in &nodes {
            writeln!(w, "{:.8e} {:.8e} 0", v[0], v[1])?;
        }
        writeln!(w, "SCALARS pressure double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for (_, v, _) in &nodes {
            writeln!(w, "{:.8e}", v[2])?;
        }
        writeln!(w, "SCALARS stokes int 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for (_, _, s) in &nodes {
            writeln!(w, "{}", u8::from(*s == Provenance::Stokes))?;
        }
        Ok(())
    }
}
