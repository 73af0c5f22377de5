//! Structured quadrilateral meshes of rectangles and perforated rectangles.

use std::io::Write;

use crate::error::{IcddError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectDomain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl RectDomain {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let d = RectDomain { x_min, x_max, y_min, y_max };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max;
        if ok {
            Ok(())
        } else {
            Err(IcddError::InvalidGeometry(format!("degenerate rectangle {self:?}")))
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Periodic array of centered square obstacles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleLattice {
    /// Cell side `l`.
    pub cell_size: f64,
    /// Obstacle side as a fraction of `l`.
    pub side_fraction: f64,
    /// Rectangle tiled by the cells.
    pub extent: RectDomain,
}

impl ObstacleLattice {
    pub fn new(cell_size: f64, side_fraction: f64, extent: RectDomain) -> Result<Self> {
        let l = ObstacleLattice { cell_size, side_fraction, extent };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        self.extent.validate()?;
        if !(self.cell_size > 0.0) {
            return Err(IcddError::InvalidGeometry(format!("cell size {} must be positive", self.cell_size)));
        }
        if !(self.side_fraction > 0.0 && self.side_fraction < 1.0) {
            return Err(IcddError::InvalidGeometry(format!(
                "obstacle fraction {} must lie in (0, 1)",
                self.side_fraction
            )));
        }
        let (nx, ny) = (self.extent.width() / self.cell_size, self.extent.height() / self.cell_size);
        if (nx - nx.round()).abs() > 1e-9 * nx.max(1.0) || (ny - ny.round()).abs() > 1e-9 * ny.max(1.0) {
            return Err(IcddError::InvalidGeometry(format!(
                "lattice extent {:?} is not a multiple of the cell size {}",
                self.extent, self.cell_size
            )));
        }
        Ok(())
    }

    /// Number of cells along x and y.
    pub fn cells(&self) -> (usize, usize) {
        (
            (self.extent.width() / self.cell_size).round() as usize,
            (self.extent.height() / self.cell_size).round() as usize,
        )
    }

    /// Unit cell lattice used by the periodic cell problem.
    pub fn unit_cell(side_fraction: f64) -> Result<Self> {
        Self::new(1.0, side_fraction, RectDomain::new(0.0, 1.0, 0.0, 1.0)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Bottom,
    Right,
    Top,
    Left,
    Obstacle,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] =
        [BoundaryTag::Bottom, BoundaryTag::Right, BoundaryTag::Top, BoundaryTag::Left, BoundaryTag::Obstacle];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Right => "right",
            BoundaryTag::Top => "top",
            BoundaryTag::Left => "left",
            BoundaryTag::Obstacle => "obstacle",
        }
    }
}

/// Element side, counterclockwise from the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub element: usize,
    pub side: Side,
    pub tag: BoundaryTag,
}

/// Uniform tensor grid with a subset of active cells.
///
/// Vertices are numbered lexicographically (x fastest) among those touching
/// an active cell; elements likewise among active cells.
#[derive(Debug, Clone)]
pub struct StructuredMesh {
    xs: Vec<f64>,
    ys: Vec<f64>,
    active: Vec<bool>,
    vertex_id: Vec<usize>,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
    element_cell: Vec<(usize, usize)>,
    cell_element: Vec<usize>,
    boundary: Vec<BoundaryEdge>,
}

pub const NONE: usize = usize::MAX;

fn grid_line(min: f64, max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { max } else { min + (max - min) * i as f64 / n as f64 }).collect()
}

impl StructuredMesh {
    fn from_grid(xs: Vec<f64>, ys: Vec<f64>, active: Vec<bool>) -> Self {
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);
        let is_active = |i: isize, j: isize| {
            i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && active[j as usize * nx + i as usize]
        };
        let mut vertex_id = vec![NONE; (nx + 1) * (ny + 1)];
        let mut nodes = vec![];
        for j in 0..=ny {
            for i in 0..=nx {
                let (ii, jj) = (i as isize, j as isize);
                if is_active(ii - 1, jj - 1) || is_active(ii, jj - 1) || is_active(ii - 1, jj) || is_active(ii, jj) {
                    vertex_id[j * (nx + 1) + i] = nodes.len();
                    nodes.push([xs[i], ys[j]]);
                }
            }
        }
        let mut elements = vec![];
        let mut element_cell = vec![];
        let mut cell_element = vec![NONE; nx * ny];
        let mut boundary = vec![];
        for j in 0..ny {
            for i in 0..nx {
                if !active[j * nx + i] {
                    continue;
                }
                let v = |a: usize, b: usize| vertex_id[(j + b) * (nx + 1) + i + a];
                let e = elements.len();
                cell_element[j * nx + i] = e;
                elements.push([v(0, 0), v(1, 0), v(1, 1), v(0, 1)]);
                element_cell.push((i, j));
                let (ii, jj) = (i as isize, j as isize);
                let sides = [
                    (Side::Bottom, j == 0, BoundaryTag::Bottom, is_active(ii, jj - 1)),
                    (Side::Right, i == nx - 1, BoundaryTag::Right, is_active(ii + 1, jj)),
                    (Side::Top, j == ny - 1, BoundaryTag::Top, is_active(ii, jj + 1)),
                    (Side::Left, i == 0, BoundaryTag::Left, is_active(ii - 1, jj)),
                ];
                for (side, outer, tag, neighbour) in sides {
                    if outer {
                        boundary.push(BoundaryEdge { element: e, side, tag });
                    } else if !neighbour {
                        boundary.push(BoundaryEdge { element: e, side, tag: BoundaryTag::Obstacle });
                    }
                }
            }
        }
        StructuredMesh { xs, ys, active, vertex_id, nodes, elements, element_cell, cell_element, boundary }
    }

    pub fn nx(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn ny(&self) -> usize {
        self.ys.len() - 1
    }

    /// Vertical grid line abscissae.
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// Horizontal grid line ordinates.
    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Counterclockwise vertex ids, starting bottom-left.
    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn bounds(&self) -> RectDomain {
        RectDomain { x_min: self.xs[0], x_max: self.xs[self.nx()], y_min: self.ys[0], y_max: self.ys[self.ny()] }
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.active[j * self.nx() + i]
    }

    /// Grid cell `(i, j)` of element `e`.
    pub fn element_cell(&self, e: usize) -> (usize, usize) {
        self.element_cell[e]
    }

    /// Element occupying grid cell `(i, j)`, if active.
    pub fn cell_element(&self, i: usize, j: usize) -> Option<usize> {
        let e = self.cell_element[j * self.nx() + i];
        (e != NONE).then_some(e)
    }

    /// Vertex at grid point `(i, j)`, if present.
    pub fn vertex(&self, i: usize, j: usize) -> Option<usize> {
        let v = self.vertex_id[j * (self.nx() + 1) + i];
        (v != NONE).then_some(v)
    }

    pub fn element_bounds(&self, e: usize) -> RectDomain {
        let (i, j) = self.element_cell[e];
        RectDomain { x_min: self.xs[i], x_max: self.xs[i + 1], y_min: self.ys[j], y_max: self.ys[j + 1] }
    }

    pub fn element_area(&self, e: usize) -> f64 {
        self.element_bounds(e).area()
    }

    pub fn area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.element_area(e)).sum()
    }

    /// Smallest element height.
    pub fn min_dy(&self) -> f64 {
        self.ys.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_h(&self) -> f64 {
        let dx = self.xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let dy = self.ys.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        dx.max(dy)
    }

    /// Index of the horizontal grid line at `y` within half the smallest element height.
    pub fn snap_row(&self, y: f64) -> Result<usize> {
        let tol = 0.5 * self.min_dy();
        let (j, d) = self.ys.iter().enumerate().map(|(j, yj)| (j, (yj - y).abs())).fold((0, f64::INFINITY), |a, b| {
            if b.1 < a.1 {
                b
            } else {
                a
            }
        });
        if d <= tol {
            Ok(j)
        } else {
            Err(IcddError::OffGrid { value: y, nearest: self.ys[j], tol })
        }
    }

    /// Grid cell containing `(x, y)`, with local coordinates in `[0, 1]^2`.
    /// On shared edges active cells win. Returns `None` outside the grid or in
    /// a hole.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, [f64; 2])> {
        let (ci, cj) = (cell_candidates(&self.xs, x)?, cell_candidates(&self.ys, y)?);
        for &j in cj.iter().flatten() {
            for &i in ci.iter().flatten() {
                if let Some(e) = self.cell_element(i, j) {
                    let xi = ((x - self.xs[i]) / (self.xs[i + 1] - self.xs[i])).clamp(0.0, 1.0);
                    let eta = ((y - self.ys[j]) / (self.ys[j + 1] - self.ys[j])).clamp(0.0, 1.0);
                    return Some((e, [xi, eta]));
                }
            }
        }
        None
    }

    /// Sub-mesh between two horizontal grid lines, sharing this mesh's
    /// coordinates bit for bit.
    pub fn strip(&self, y_lo: f64, y_hi: f64) -> Result<StructuredMesh> {
        let (j0, j1) = (self.snap_row(y_lo)?, self.snap_row(y_hi)?);
        if j1 <= j0 {
            return Err(IcddError::InvalidGeometry(format!("empty strip [{y_lo}, {y_hi}]")));
        }
        let nx = self.nx();
        let ys = self.ys[j0..=j1].to_vec();
        let active = self.active[j0 * nx..j1 * nx].to_vec();
        Ok(StructuredMesh::from_grid(self.xs.clone(), ys, active))
    }

    /// Legacy VTK unstructured grid, geometry only.
    pub fn write_vtk<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "structured quadrilateral mesh")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.nodes.len())?;
        for p in &self.nodes {
            writeln!(w, "{:.17e} {:.17e} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {} {}", self.elements.len(), 5 * self.elements.len())?;
        for e in &self.elements {
            writeln!(w, "4 {} {} {} {}", e[0], e[1], e[2], e[3])?;
        }
        writeln!(w, "CELL_TYPES {}", self.elements.len())?;
        for _ in &self.elements {
            writeln!(w, "9")?;
        }
        Ok(())
    }
}

/// Up to two cells whose closed interval contains `t`.
fn cell_candidates(lines: &[f64], t: f64) -> Option<[Option<usize>; 2]> {
    let n = lines.len() - 1;
    let span = lines[n] - lines[0];
    let eps = 1e-12 * span;
    if t < lines[0] - eps || t > lines[n] + eps {
        return None;
    }
    let k = lines.partition_point(|&l| l <= t).saturating_sub(1).min(n - 1);
    let mut out = [Some(k), None];
    if (t - lines[k]).abs() <= eps && k > 0 {
        out[1] = Some(k - 1);
    } else if (t - lines[k + 1]).abs() <= eps && k + 1 < n {
        out[1] = Some(k + 1);
    }
    Some(out)
}

fn count(extent: f64, h: f64) -> usize {
    ((extent / h) - 1e-9).ceil().max(1.0) as usize
}

/// Uniform grid with `ceil(extent / h)` elements per axis.
pub fn build_rect_mesh(domain: RectDomain, h: f64) -> Result<StructuredMesh> {
    domain.validate()?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(IcddError::InvalidParameter(format!("element size {h} must be positive")));
    }
    let (nx, ny) = (count(domain.width(), h), count(domain.height(), h));
    let xs = grid_line(domain.x_min, domain.x_max, nx);
    let ys = grid_line(domain.y_min, domain.y_max, ny);
    Ok(StructuredMesh::from_grid(xs, ys, vec![true; nx * ny]))
}

/// Grid of spacing `l / n_per_cell` with the obstacle cells removed.
pub fn build_perforated_mesh(
    domain: RectDomain,
    lattice: ObstacleLattice,
    n_per_cell: usize,
) -> Result<StructuredMesh> {
    domain.validate()?;
    lattice.validate()?;
    if n_per_cell == 0 {
        return Err(IcddError::InvalidParameter("n_per_cell must be positive".into()));
    }
    let margin = (1.0 - lattice.side_fraction) / 2.0 * n_per_cell as f64;
    if (margin - margin.round()).abs() > 1e-9 || margin.round() < 1.0 {
        return Err(IcddError::MisalignedObstacle(format!(
            "(1 - s)/2 * n_per_cell = {margin} for s = {}, n_per_cell = {n_per_cell}",
            lattice.side_fraction
        )));
    }
    let m = margin.round() as usize;
    let h = lattice.cell_size / n_per_cell as f64;
    let ext = lattice.extent;
    let fits = ext.x_min >= domain.x_min - 1e-12
        && ext.x_max <= domain.x_max + 1e-12
        && ext.y_min >= domain.y_min - 1e-12
        && ext.y_max <= domain.y_max + 1e-12;
    let on_grid = |a: f64| ((a / h) - (a / h).round()).abs() <= 1e-7;
    let offsets = [ext.x_min - domain.x_min, ext.y_min - domain.y_min, domain.width(), domain.height()];
    if !fits || !offsets.iter().all(|&a| on_grid(a)) {
        return Err(IcddError::InvalidGeometry(format!(
            "lattice {:?} does not fit the grid of {domain:?} with h = {h}",
            ext
        )));
    }
    let (nx, ny) = ((domain.width() / h).round() as usize, (domain.height() / h).round() as usize);
    let (i0, j0) =
        (((ext.x_min - domain.x_min) / h).round() as usize, ((ext.y_min - domain.y_min) / h).round() as usize);
    let (cx, cy) = lattice.cells();
    let mut active = vec![true; nx * ny];
    for b in 0..cy {
        for a in 0..cx {
            for dj in m..n_per_cell - m {
                for di in m..n_per_cell - m {
                    let (i, j) = (i0 + a * n_per_cell + di, j0 + b * n_per_cell + dj);
                    active[j * nx + i] = false;
                }
            }
        }
    }
    let xs = grid_line(domain.x_min, domain.x_max, nx);
    let ys = grid_line(domain.y_min, domain.y_max, ny);
    Ok(StructuredMesh::from_grid(xs, ys, active))
}

/// Vertices on a horizontal grid line, sorted by x.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceLine {
    /// Snapped ordinate.
    pub y: f64,
    /// Grid row index.
    pub row: usize,
    pub nodes: Vec<usize>,
}

pub fn extract_interface_nodes(mesh: &StructuredMesh, y: f64) -> Result<InterfaceLine> {
    let row = mesh.snap_row(y)?;
    let nodes: Vec<usize> = (0..=mesh.nx()).filter_map(|i| mesh.vertex(i, row)).collect();
    Ok(InterfaceLine { y: mesh.ys()[row], row, nodes })
}

pub fn ensure_disjoint(a: &InterfaceLine, b: &InterfaceLine) -> Result<()> {
    if a.row == b.row || a.y == b.y {
        return Err(IcddError::InterfacesNotDisjoint(format!("both interfaces lie on y = {}", a.y)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = build_rect_mesh(RectDomain::new(0.0, 1.0, 0.0, 1.0).unwrap(), 0.5).unwrap();
        assert_eq!(m.elements().len(), 4);
        assert_eq!(m.nodes().len(), 9);
    }

    #[test]
    fn cavity_grid() {
        let m = build_rect_mesh(RectDomain::new(-0.5, 0.5, -0.5, 1.0).unwrap(), 1.0 / 20.0).unwrap();
        assert_eq!((m.nx(), m.ny()), (20, 30));
        let line = extract_interface_nodes(&m, 0.0).unwrap();
        assert_eq!(line.nodes.len(), 21);
        assert_eq!(line.y, 0.0);
    }

    #[test]
    fn bad_inputs() {
        assert!(RectDomain::new(1.0, 0.0, 0.0, 1.0).is_err());
        let d = RectDomain::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(build_rect_mesh(d, 0.0).is_err());
        assert!(build_rect_mesh(d, -1.0).is_err());
    }

    #[test]
    fn perforated_cell() {
        let lat = ObstacleLattice::unit_cell(0.8).unwrap();
        let m = build_perforated_mesh(lat.extent, lat, 10).unwrap();
        assert_eq!(m.elements().len(), 100 - 64);
        assert!((m.area() - 0.36).abs() < 1e-14);
        let n_obs = m.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Obstacle).count();
        assert_eq!(n_obs, 32);
        assert!(matches!(build_perforated_mesh(lat.extent, lat, 4), Err(IcddError::MisalignedObstacle(_))));
    }

    #[test]
    fn locate_prefers_active() {
        let lat = ObstacleLattice::unit_cell(0.6).unwrap();
        let m = build_perforated_mesh(lat.extent, lat, 5).unwrap();
        // (0.2, 0.5) is on the obstacle's left edge
        let (e, xi) = m.locate(0.2, 0.5).unwrap();
        assert_eq!(m.element_cell(e).0, 0);
        assert_eq!(xi[0], 1.0);
        assert!(m.locate(0.5, 0.5).is_none());
        assert!(m.locate(1.5, 0.5).is_none());
    }

    #[test]
    fn strips_share_coordinates() {
        let m = build_rect_mesh(RectDomain::new(-0.5, 0.5, -0.5, 1.0).unwrap(), 0.1).unwrap();
        let top = m.strip(-0.1, 1.0).unwrap();
        let bot = m.strip(-0.5, 0.0).unwrap();
        let lt = extract_interface_nodes(&top, 0.0).unwrap();
        let lb = extract_interface_nodes(&bot, 0.0).unwrap();
        for (a, b) in lt.nodes.iter().zip(&lb.nodes) {
            assert_eq!(top.nodes()[*a][0].to_bits(), bot.nodes()[*b][0].to_bits());
            assert_eq!(top.nodes()[*a][1].to_bits(), bot.nodes()[*b][1].to_bits());
        }
        let g = extract_interface_nodes(&top, -0.1).unwrap();
        assert!(ensure_disjoint(&g, &lt).is_ok());
        assert!(ensure_disjoint(&lt, &lt).is_err());
        assert_eq!(extract_interface_nodes(&top, -0.03).unwrap().y, 0.0);
        assert!(matches!(extract_interface_nodes(&top, -0.2), Err(IcddError::OffGrid { .. })));
    }
}
