/// Gauss-Legendre points and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut pts = vec![0.0; n];
    let mut wts = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        // map from [-1, 1] to [0, 1]
        pts[n - 1 - i] = 0.5 * (x + 1.0);
        wts[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (pts, wts)
}

/// Equispaced 1D Lagrange basis of degree `k` on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Lagrange1d {
    nodes: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(k: usize) -> Self {
        Lagrange1d { nodes: (0..=k).map(|i| i as f64 / k as f64).collect() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value, first and second derivative of basis `a` at `t`.
    pub fn eval(&self, a: usize, t: f64) -> [f64; 3] {
        let n = &self.nodes;
        let idx: Vec<usize> = (0..n.len()).filter(|&m| m != a).collect();
        let denom: f64 = idx.iter().map(|&m| n[a] - n[m]).product();
        let f: Vec<f64> = idx.iter().map(|&m| t - n[m]).collect();
        let prod_except = |skip: &[usize]| -> f64 {
            f.iter().enumerate().filter(|(i, _)| !skip.contains(i)).map(|(_, v)| v).product()
        };
        let v = prod_except(&[]);
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for i in 0..f.len() {
            d1 += prod_except(&[i]);
            for j in 0..f.len() {
                if j != i {
                    d2 += prod_except(&[i, j]);
                }
            }
        }
        [v / denom, d1 / denom, d2 / denom]
    }
}

/// Tensor-product `Q_k` basis values at `(xi, eta)` in local numbering
/// `a + (k + 1) b`. Returns value, d/dxi, d/deta, d2/dxi2, d2/deta2.
pub fn tensor_eval(basis: &Lagrange1d, xi: f64, eta: f64) -> Vec<[f64; 5]> {
    let n = basis.len();
    let bx: Vec<[f64; 3]> = (0..n).map(|a| basis.eval(a, xi)).collect();
    let by: Vec<[f64; 3]> = (0..n).map(|b| basis.eval(b, eta)).collect();
    let mut out = Vec::with_capacity(n * n);
    for yb in &by {
        for xa in &bx {
            out.push([xa[0] * yb[0], xa[1] * yb[0], xa[0] * yb[1], xa[2] * yb[0], xa[0] * yb[2]]);
        }
    }
    out
}

/// Element matrices on an `hx` by `hy` rectangle.
#[derive(Debug, Clone)]
pub struct ElementTables {
    pub nb: usize,
    /// `int phi_i phi_j`
    pub mass: Vec<f64>,
    /// `int grad phi_i . grad phi_j`
    pub stiffness: Vec<f64>,
    /// `grad[c][i][j] = int phi_i d_c phi_j`
    pub grad: [Vec<f64>; 2],
    /// `lap[c][i][j] = int d_c phi_i lap phi_j`
    pub lap: [Vec<f64>; 2],
    /// `int phi_i`
    pub load: Vec<f64>,
    /// Quadrature on the reference square: `(xi, eta, weight)` and basis data.
    pub quad: Vec<([f64; 2], f64, Vec<[f64; 5]>)>,
    pub hx: f64,
    pub hy: f64,
}

impl ElementTables {
    pub fn new(order: usize, quad_points: usize, hx: f64, hy: f64) -> Self {
        let basis = Lagrange1d::new(order);
        let (gp, gw) = gauss_legendre(quad_points);
        let nb = basis.len() * basis.len();
        let mut quad = vec![];
        for (j, &eta) in gp.iter().enumerate() {
            for (i, &xi) in gp.iter().enumerate() {
                quad.push(([xi, eta], gw[i] * gw[j], tensor_eval(&basis, xi, eta)));
            }
        }
        let mut t = ElementTables {
            nb,
            mass: vec![0.0; nb * nb],
            stiffness: vec![0.0; nb * nb],
            grad: [vec![0.0; nb * nb], vec![0.0; nb * nb]],
            lap: [vec![0.0; nb * nb], vec![0.0; nb * nb]],
            load: vec![0.0; nb],
            quad: vec![],
            hx,
            hy,
        };
        let jac = hx * hy;
        for (_, w, phi) in &quad {
            let w = w * jac;
            for i in 0..nb {
                let pi = phi[i];
                let gi = [pi[1] / hx, pi[2] / hy];
                t.load[i] += w * pi[0];
                for j in 0..nb {
                    let pj = phi[j];
                    let gj = [pj[1] / hx, pj[2] / hy];
                    let lapj = pj[3] / (hx * hx) + pj[4] / (hy * hy);
                    let k = i * nb + j;
                    t.mass[k] += w * pi[0] * pj[0];
                    t.stiffness[k] += w * (gi[0] * gj[0] + gi[1] * gj[1]);
                    for c in 0..2 {
                        t.grad[c][k] += w * pi[0] * gj[c];
                        t.lap[c][k] += w * gi[c] * lapj;
                    }
                }
            }
        }
        t.quad = quad;
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exactness() {
        for n in 1..=6 {
            let (p, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = p.iter().zip(&w).map(|(x, wi)| wi * x.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn lagrange_partition_of_unity() {
        for k in 1..=3 {
            let b = Lagrange1d::new(k);
            for &t in &[0.0, 0.17, 0.5, 0.93] {
                let s: [f64; 3] = (0..=k).fold([0.0; 3], |acc, a| {
                    let e = b.eval(a, t);
                    [acc[0] + e[0], acc[1] + e[1], acc[2] + e[2]]
                });
                assert!((s[0] - 1.0).abs() < 1e-13 && s[1].abs() < 1e-12 && s[2].abs() < 1e-10);
            }
            for a in 0..=k {
                for m in 0..=k {
                    let v = b.eval(a, m as f64 / k as f64)[0];
                    assert!((v - if a == m { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn element_tables_area_and_symmetry() {
        let t = ElementTables::new(2, 3, 0.3, 0.2);
        let area: f64 = t.mass.iter().sum();
        assert!((area - 0.06).abs() < 1e-15);
        for i in 0..t.nb {
            let row: f64 = (0..t.nb).map(|j| t.stiffness[i * t.nb + j]).sum();
            assert!(row.abs() < 1e-13);
            for j in 0..t.nb {
                assert!((t.stiffness[i * t.nb + j] - t.stiffness[j * t.nb + i]).abs() < 1e-14);
            }
        }
        // Q1 on rectangles has no second derivatives
        let t1 = ElementTables::new(1, 2, 0.3, 0.2);
        assert!(t1.lap[0].iter().chain(&t1.lap[1]).all(|v| v.abs() < 1e-15));
    }
}
