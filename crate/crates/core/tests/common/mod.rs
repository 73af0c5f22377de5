#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use icdd::fem::{assemble_darcy, assemble_stokes, BoundaryCondition, BoundarySpec, FemConfig, NodalField, VectorFn};
use icdd::icdd::IcddProblem;
use icdd::linalg::SparseMatrix;
use icdd::mesh::{build_rect_mesh, BoundaryTag, RectDomain};

pub fn unit() -> RectDomain {
    RectDomain::new(0.0, 1.0, 0.0, 1.0).unwrap()
}

pub fn all_tags(cond: BoundaryCondition) -> BoundarySpec {
    let mut bc = BoundarySpec::new();
    for t in [BoundaryTag::Bottom, BoundaryTag::Right, BoundaryTag::Top, BoundaryTag::Left] {
        bc.set(t, cond.clone());
    }
    bc
}

/// L2 error of components `comps` against `exact`, by a 5x5 Gauss rule per element.
pub fn l2_error(field: &NodalField, exact: &dyn Fn(f64, f64) -> [f64; 3], comps: &[usize]) -> f64 {
    let (gp, gw) = icdd::fem::gauss_legendre(5);
    let mesh = field.lattice.mesh();
    let mut s = 0.0;
    for e in 0..mesh.elements().len() {
        let b = mesh.element_bounds(e);
        for (i, xi) in gp.iter().enumerate() {
            for (j, eta) in gp.iter().enumerate() {
                let (x, y) = (b.x_min + xi * b.width(), b.y_min + eta * b.height());
                let v = field.eval_local(e, [*xi, *eta]);
                let ex = exact(x, y);
                for &c in comps {
                    s += gw[i] * gw[j] * b.area() * (v[c] - ex[c]).powi(2);
                }
            }
        }
    }
    s.sqrt()
}

pub fn slope(hs: &[f64], es: &[f64]) -> f64 {
    let n = hs.len() as f64;
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

pub fn stokes_exact(x: f64, y: f64) -> [f64; 3] {
    let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
    [PI * sx * sx * (2.0 * PI * y).sin(), -PI * (2.0 * PI * x).sin() * sy * sy, (PI * x).cos() * (PI * y).cos()]
}

pub fn stokes_force(x: f64, y: f64) -> [f64; 2] {
    let p3 = PI.powi(3);
    let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
    let lap1 = 2.0 * p3 * (2.0 * PI * x).cos() * (2.0 * PI * y).sin() - 4.0 * p3 * sx * sx * (2.0 * PI * y).sin();
    let lap2 = 4.0 * p3 * (2.0 * PI * x).sin() * sy * sy - 2.0 * p3 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos();
    let px = -PI * (PI * x).sin() * (PI * y).cos();
    let py = -PI * (PI * x).cos() * (PI * y).sin();
    [-lap1 + px, -lap2 + py]
}

pub fn stokes_error(order: usize, h: f64) -> f64 {
    let mesh = Arc::new(build_rect_mesh(unit(), h).unwrap());
    let cfg = FemConfig::new(order);
    let f: VectorFn = Arc::new(stokes_force);
    let bc = all_tags(BoundaryCondition::no_slip());
    let sys = assemble_stokes(mesh, &cfg, 1.0, Some(f), &bc, None, true).unwrap();
    let x = sys.factorize().unwrap().solve(&sys.rhs).unwrap();
    let field = sys.to_field(&x, &[]);
    l2_error(&field, &stokes_exact, &[0, 1])
}

pub fn darcy_exact(x: f64, y: f64) -> [f64; 3] {
    // divergence-free velocity, K = mu = 1, f = u + grad p
    stokes_exact(x, y)
}

pub fn darcy_force(x: f64, y: f64) -> [f64; 2] {
    let u = stokes_exact(x, y);
    [u[0] - PI * (PI * x).sin() * (PI * y).cos(), u[1] - PI * (PI * x).cos() * (PI * y).sin()]
}

pub fn darcy_error(order: usize, h: f64) -> f64 {
    let mesh = Arc::new(build_rect_mesh(unit(), h).unwrap());
    let cfg = FemConfig::new(order);
    let bc = all_tags(BoundaryCondition::pressure(|x, y| darcy_exact(x, y)[2]));
    let f: VectorFn = Arc::new(darcy_force);
    let sys = assemble_darcy(mesh, &cfg, 1.0, 1.0, Some(f), &bc, None).unwrap();
    let x = sys.factorize().unwrap().solve(&sys.rhs).unwrap();
    let field = sys.to_field(&x, &[]);
    l2_error(&field, &darcy_exact, &[2])
}

pub fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for r in 0..a.nrows() {
        for (c, v) in a.row(r) {
            m[(r, c)] += v;
        }
    }
    m
}

/// Blocks of the coupled system in the order `U = [U_f; U_p]`, `g = [g_f; g_p]`.
pub struct Blocks {
    pub a: DMatrix<f64>,
    pub a_gamma: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub f: DVector<f64>,
}

pub fn blocks(p: &IcddProblem) -> Blocks {
    let (nf, np) = (p.stokes.n_interior(), p.darcy.n_interior());
    let (mf, mp) = (p.r_f.len(), p.r_p.len());
    let (n, m) = (nf + np, mf + mp);
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (nf, nf)).copy_from(&dense(&p.stokes.matrix));
    a.view_mut((nf, nf), (np, np)).copy_from(&dense(&p.darcy.matrix));
    let mut a_gamma = DMatrix::zeros(n, m);
    a_gamma.view_mut((0, 0), (nf, mf)).copy_from(&dense(&p.stokes.a_gamma));
    a_gamma.view_mut((nf, mf), (np, mp)).copy_from(&dense(&p.darcy.a_gamma));
    // g_f matches the Darcy trace, g_p the Stokes trace
    let mut r = DMatrix::zeros(m, n);
    for (k, &i) in p.r_f.iter().enumerate() {
        r[(k, nf + i)] = 1.0;
    }
    for (k, &i) in p.r_p.iter().enumerate() {
        r[(mf + k, i)] = 1.0;
    }
    let f = DVector::from_iterator(n, p.stokes.rhs.iter().chain(&p.darcy.rhs).copied());
    Blocks { a, a_gamma, r, f }
}

/// `S = I - [-R, R] [[A, 0], [-A_g R, A]]^-1 [A_g; A_g]`.
pub fn dense_schur(b: &Blocks) -> DMatrix<f64> {
    let (n, m) = (b.a.nrows(), b.r.nrows());
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&b.a);
    big.view_mut((n, n), (n, n)).copy_from(&b.a);
    big.view_mut((n, 0), (n, n)).copy_from(&(-&b.a_gamma * &b.r));
    let mut rhs = DMatrix::zeros(2 * n, m);
    rhs.view_mut((0, 0), (n, m)).copy_from(&b.a_gamma);
    rhs.view_mut((n, 0), (n, m)).copy_from(&b.a_gamma);
    let z = big.lu().solve(&rhs).unwrap();
    let mut left = DMatrix::zeros(m, 2 * n);
    left.view_mut((0, 0), (m, n)).copy_from(&(-&b.r));
    left.view_mut((0, n), (m, n)).copy_from(&b.r);
    DMatrix::identity(m, m) - left * z
}
