//! Error metrics between ICDD and pore-resolved solutions.

use std::sync::Arc;

use crate::dns::DnsSolution;
use crate::error::{IcddError, Result};
use crate::fem::{gauss_legendre, FemConfig, NodalField};
use crate::homogenization::CellSolution;
use crate::icdd::{assemble_problem, CompositeSolution, IcddGeometry, IcddSolution, Physics};
use crate::linalg::KrylovConfig;
use crate::mesh::{build_rect_mesh, StructuredMesh};

/// Anything that can be evaluated as `[u1, u2, p]` at a point.
pub trait PointField: Sync {
    fn value(&self, x: f64, y: f64) -> Option<[f64; 3]>;
}

impl PointField for NodalField {
    fn value(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        self.eval(x, y)
    }
}

impl PointField for CompositeSolution {
    fn value(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        self.eval(x, y)
    }
}

/// The trivial extension of the pore-resolved solution.
impl PointField for DnsSolution {
    fn value(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        self.eval_extended(x, y)
    }
}

impl<F: Fn(f64, f64) -> [f64; 3] + Sync> PointField for F {
    fn value(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        Some(self(x, y))
    }
}

/// `field` with a constant added to the pressure.
pub struct PressureShift<'a> {
    pub field: &'a dyn PointField,
    pub shift: f64,
}

impl PointField for PressureShift<'_> {
    fn value(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        self.field.value(x, y).map(|v| [v[0], v[1], v[2] + self.shift])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    /// Restricted fluid region above the fluid interface.
    FluidStar,
    /// Porous region below the fluid interface.
    PorousMinus,
    /// Porous region at least one cell below the bed top.
    PorousStar,
    Custom,
}

/// Horizontal band `y_min <= y <= y_max` of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub y_min: f64,
    pub y_max: f64,
}

/// Upper bound of the restricted fluid region.
pub const FLUID_STAR_TOP: f64 = 0.5;

impl RegionSpec {
    pub fn new(kind: RegionKind, y_min: f64, y_max: f64) -> Result<Self> {
        if !(y_min < y_max) {
            return Err(IcddError::InvalidGeometry(format!("empty region [{y_min}, {y_max}]")));
        }
        Ok(RegionSpec { kind, y_min, y_max })
    }

    /// `y_f <= y < 0.5`.
    pub fn fluid_star(y_f: f64) -> Result<Self> {
        Self::new(RegionKind::FluidStar, y_f, FLUID_STAR_TOP)
    }

    /// `bottom <= y <= y_f`.
    pub fn porous_minus(bottom: f64, y_f: f64) -> Result<Self> {
        Self::new(RegionKind::PorousMinus, bottom, y_f)
    }

    /// `bottom <= y <= -l`.
    pub fn porous_star(bottom: f64, cell_size: f64) -> Result<Self> {
        Self::new(RegionKind::PorousStar, bottom, -cell_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    Velocity,
    Pressure,
}

impl Components {
    fn range(self) -> std::ops::Range<usize> {
        match self {
            Components::Velocity => 0..2,
            Components::Pressure => 2..3,
        }
    }
}

/// Gauss points per direction used for error integrals.
const ERROR_QUADRATURE: usize = 4;

/// Active elements of `grid` inside `region`. The region bounds must be grid
/// lines.
fn region_elements(grid: &StructuredMesh, region: &RegionSpec) -> Result<Vec<usize>> {
    let lo = grid.snap_row(region.y_min.max(grid.ys()[0]))?;
    let hi = grid.snap_row(region.y_max.min(grid.ys()[grid.ny()]))?;
    if hi <= lo {
        return Err(IcddError::InvalidGeometry(format!(
            "region [{}, {}] does not intersect the grid",
            region.y_min, region.y_max
        )));
    }
    let mut out = vec![];
    for j in lo..hi {
        for i in 0..grid.nx() {
            if let Some(e) = grid.cell_element(i, j) {
                out.push(e);
            }
        }
    }
    Ok(out)
}

fn point(f: &dyn PointField, x: f64, y: f64) -> Result<[f64; 3]> {
    f.value(x, y).ok_or_else(|| IcddError::InvalidGeometry(format!("field undefined at ({x}, {y})")))
}

/// Integrates `g(a, b)` over the active elements of `grid` inside `region`.
fn integrate_region(
    a: &dyn PointField,
    b: &dyn PointField,
    region: &RegionSpec,
    grid: &StructuredMesh,
    g: impl Fn([f64; 3], [f64; 3]) -> f64,
) -> Result<(f64, f64)> {
    let (gp, gw) = gauss_legendre(ERROR_QUADRATURE);
    let (mut sum, mut area) = (0.0, 0.0);
    for e in region_elements(grid, region)? {
        let r = grid.element_bounds(e);
        for (i, s) in gp.iter().enumerate() {
            for (j, t) in gp.iter().enumerate() {
                let (x, y) = (r.x_min + s * r.width(), r.y_min + t * r.height());
                let w = gw[i] * gw[j] * r.area();
                sum += w * g(point(a, x, y)?, point(b, x, y)?);
                area += w;
            }
        }
    }
    Ok((sum, area))
}

/// `||a - b||` in L2 over the active elements of `grid` inside `region`.
///
/// Quadrature follows the elements of `grid`; passing a perforated grid
/// restricts the integral to the fluid.
pub fn l2_error(
    a: &dyn PointField,
    b: &dyn PointField,
    region: &RegionSpec,
    grid: &StructuredMesh,
    comps: Components,
) -> Result<f64> {
    let (s, _) = integrate_region(a, b, region, grid, |u, v| comps.range().map(|c| (u[c] - v[c]).powi(2)).sum())?;
    Ok(s.sqrt())
}

/// Mean of `p_b - p_a` over the region.
pub fn pressure_offset(
    a: &dyn PointField,
    b: &dyn PointField,
    region: &RegionSpec,
    grid: &StructuredMesh,
) -> Result<f64> {
    let (s, area) = integrate_region(a, b, region, grid, |u, v| v[2] - u[2])?;
    Ok(s / area)
}

/// One-dimensional L2 errors `[e_u1, e_u2, e_p]` along the grid line `y`.
pub fn trace_error(a: &dyn PointField, b: &dyn PointField, y: f64, grid: &StructuredMesh) -> Result<[f64; 3]> {
    let y = grid.ys()[grid.snap_row(y)?];
    let (gp, gw) = gauss_legendre(ERROR_QUADRATURE);
    let mut e = [0.0; 3];
    for w in grid.xs().windows(2) {
        for (s, wt) in gp.iter().zip(&gw) {
            let x = w[0] + s * (w[1] - w[0]);
            let (u, v) = (point(a, x, y)?, point(b, x, y)?);
            for c in 0..3 {
                e[c] += wt * (w[1] - w[0]) * (u[c] - v[c]).powi(2);
            }
        }
    }
    Ok(e.map(f64::sqrt))
}

/// How cell fluctuations are scaled in the porous reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `sum_i w_i u_i`, whose cell average is `K_hat u`.
    Literal,
    /// `sum_i w_i (K_hat^-1 u)_i`, whose cell average is `u`.
    InversePermeability,
}

/// Darcy velocity modulated by the periodic cell velocities.
pub struct Reconstruction<'a> {
    pub darcy: &'a dyn PointField,
    pub cell: &'a CellSolution,
    pub cell_size: f64,
    /// Corner of one lattice cell.
    pub origin: [f64; 2],
    pub normalization: Normalization,
}

/// Reconstructed porous velocity from the macroscale field `darcy`. The
/// pressure is passed through unchanged.
pub fn reconstruct_porous_velocity<'a>(
    darcy: &'a dyn PointField,
    cell: &'a CellSolution,
    cell_size: f64,
    origin: [f64; 2],
    normalization: Normalization,
) -> Result<Reconstruction<'a>> {
    if !(cell_size > 0.0) {
        return Err(IcddError::InvalidParameter(format!("cell size {cell_size} must be positive")));
    }
    Ok(Reconstruction { darcy, cell, cell_size, origin, normalization })
}

impl PointField for Reconstruction<'_> {
    fn value(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        let v = self.darcy.value(x, y)?;
        let c = match self.normalization {
            Normalization::Literal => [v[0], v[1]],
            Normalization::InversePermeability => {
                let k = self.cell.inverse_permeability();
                [k[0][0] * v[0] + k[0][1] * v[1], k[1][0] * v[0] + k[1][1] * v[1]]
            }
        };
        let xi = ((x - self.origin[0]) / self.cell_size).rem_euclid(1.0);
        let eta = ((y - self.origin[1]) / self.cell_size).rem_euclid(1.0);
        let mut u = [0.0, 0.0, v[2]];
        for (i, w) in self.cell.w.iter().enumerate() {
            if let Some(wv) = w.eval(xi, eta) {
                u[0] += c[i] * wv[0];
                u[1] += c[i] * wv[1];
            }
        }
        Some(u)
    }
}

/// Least-squares slope of `log e` against `log h`.
pub fn convergence_slope(h: &[f64], e: &[f64]) -> Result<f64> {
    if h.len() != e.len() {
        return Err(IcddError::DimensionMismatch { expected: h.len(), got: e.len() });
    }
    if h.len() < 2 {
        return Err(IcddError::InvalidParameter("a slope needs at least two points".into()));
    }
    if h.iter().chain(e).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(IcddError::InvalidParameter("sizes and errors must be positive and finite".into()));
    }
    let n = h.len() as f64;
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(IcddError::InvalidParameter("all sizes are equal".into()));
    }
    Ok(sxy / sxx)
}

/// Errors of one ICDD run against the pore-resolved reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub cell_size: f64,
    pub fluid_u: f64,
    pub fluid_p: f64,
    pub porous_u: f64,
    pub porous_p: f64,
    pub porous_star_u: f64,
    pub porous_star_p: f64,
}

impl ErrorReport {
    pub fn metrics(&self) -> [(&'static str, f64); 6] {
        [
            ("u_fluid_star", self.fluid_u),
            ("p_fluid_star", self.fluid_p),
            ("u_porous_minus", self.porous_u),
            ("p_porous_minus", self.porous_p),
            ("u_porous_star", self.porous_star_u),
            ("p_porous_star", self.porous_star_p),
        ]
    }
}

/// Grid of the pore-resolved run without holes.
pub fn full_grid(dns: &DnsSolution) -> Result<StructuredMesh> {
    build_rect_mesh(dns.preset.domain, dns.obstacles.cell_size / dns.n_per_cell as f64)
}

/// Constant added to the reference pressure so both pressures share a gauge.
/// Only needed when the pressure is fixed by its mean.
pub fn reference_pressure_shift(dns: &DnsSolution, icdd: &CompositeSolution) -> Result<f64> {
    if !dns.preset.null_mean_pressure() {
        return Ok(0.0);
    }
    let region = RegionSpec::fluid_star(icdd.y_f)?;
    pressure_offset(dns, icdd, &region, dns.mesh())
}

/// All error metrics of `icdd` against `dns`. Velocities are compared on the
/// whole region (the reference is zero in obstacles), pressures on the fluid
/// part; porous velocities use the reconstruction normalized by `K_hat^-1`.
pub fn compare(dns: &DnsSolution, icdd: &CompositeSolution, cell: &CellSolution) -> Result<ErrorReport> {
    let full = full_grid(dns)?;
    let fluid = dns.mesh();
    let l = dns.obstacles.cell_size;
    let bottom = dns.preset.domain.y_min;
    let ext = dns.obstacles.extent;
    let reference = PressureShift { field: dns, shift: reference_pressure_shift(dns, icdd)? };
    let rec =
        reconstruct_porous_velocity(&icdd.darcy, cell, l, [ext.x_min, ext.y_min], Normalization::InversePermeability)?;
    let fs = RegionSpec::fluid_star(icdd.y_f)?;
    let pm = RegionSpec::porous_minus(bottom, icdd.y_f)?;
    let ps = RegionSpec::porous_star(bottom, l)?;
    Ok(ErrorReport {
        cell_size: l,
        fluid_u: l2_error(&reference, icdd, &fs, &full, Components::Velocity)?,
        fluid_p: l2_error(&reference, icdd, &fs, fluid, Components::Pressure)?,
        porous_u: l2_error(&reference, &rec, &pm, &full, Components::Velocity)?,
        porous_p: l2_error(&reference, icdd, &pm, fluid, Components::Pressure)?,
        porous_star_u: l2_error(&reference, &rec, &ps, &full, Components::Velocity)?,
        porous_star_p: l2_error(&reference, icdd, &ps, fluid, Components::Pressure)?,
    })
}

/// One row of a depth sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    /// Realized (snapped) interface height.
    pub y_f: f64,
    pub error: f64,
    pub iterations: usize,
}

/// ICDD runs on the reference grid for each depth in `deltas`, each compared
/// with `dns` in velocity over the fixed band `y_ref <= y < 0.5`.
pub fn delta_sweep(
    dns: &DnsSolution,
    permeability: f64,
    deltas: &[f64],
    y_ref: f64,
    fem: &FemConfig,
    krylov: &KrylovConfig,
) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    if deltas.is_empty() {
        return Err(IcddError::InvalidParameter("empty depth list".into()));
    }
    let full = Arc::new(full_grid(dns)?);
    let h = dns.obstacles.cell_size / dns.n_per_cell as f64;
    let region = RegionSpec::fluid_star(y_ref)?;
    deltas
        .par_iter()
        .map(|&delta| {
            let geometry = IcddGeometry { domain: dns.preset.domain, y_p: 0.0, delta, h };
            let physics = Physics { preset: dns.preset, permeability };
            let sol: IcddSolution = assemble_problem(geometry, physics, fem)?.solve(krylov)?;
            let error = l2_error(dns, &sol.composite, &region, &full, Components::Velocity)?;
            Ok(SweepRow { delta, y_f: sol.composite.y_f, error, iterations: sol.interface.iterations })
        })
        .collect()
}

/// Index of the smallest error.
pub fn sweep_minimizer(rows: &[SweepRow]) -> Option<usize> {
    rows.iter().enumerate().min_by(|a, b| a.1.error.total_cmp(&b.1.error)).map(|(i, _)| i)
}
