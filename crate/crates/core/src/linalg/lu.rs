use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SparseRowMatRef, SymbolicSparseColMatRef, SymbolicSparseRowMatRef};
use faer::{Col, Conj, MatMut, Par, Side};

use super::dot;
use super::sparse::SparseMatrix;
use crate::error::{IcddError, Result};

/// Sparse factors of a square matrix, reusable across right-hand sides.
///
/// Factorizations are `Sync`; concurrent solves against one instance are fine.
pub struct Factorization {
    n: usize,
    inner: Inner,
}

/// How the sparse factors are pivoted.
#[derive(Debug, Clone, Copy)]
pub enum Pivoting<'a> {
    /// LU with partial pivoting; any nonsingular matrix.
    Partial,
    /// Symmetric `LDL^T` with fill-reducing ordering and a prescribed sign
    /// per pivot. Meant for symmetric quasi-definite matrices (positive
    /// velocity block, negative pressure block), where it needs far less
    /// memory than LU. Solves are polished by iterative refinement.
    Signs(&'a [i8]),
}

#[allow(clippy::large_enum_variant)]
enum Solver {
    Lu(Lu<usize, f64>),
    Ldlt(Box<Ldlt>),
}

struct Ldlt {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    /// Factored matrix, kept for refinement.
    matrix: SparseMatrix,
}

#[allow(clippy::large_enum_variant)]
enum Inner {
    Plain(Solver),
    /// Last row and column eliminated by a rank-two correction; see
    /// [`factorize_bordered`].
    Bordered(Box<Border>),
}

struct Border {
    lu: Solver,
    pin: usize,
    shift: f64,
    /// Last row without its diagonal.
    v: Vec<f64>,
    /// `K~^-1 e_pin`
    b: Vec<f64>,
    /// `K~^-1 u` for the last column `u`.
    c: Vec<f64>,
    /// Inverse of the 2x2 system in `(x_pin, lambda)`.
    inv: [[f64; 2]; 2],
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.inner {
            Inner::Plain(Solver::Lu(_)) => "lu",
            Inner::Plain(Solver::Ldlt(_)) => "ldlt",
            Inner::Bordered(b) if matches!(b.lu, Solver::Lu(_)) => "bordered lu",
            Inner::Bordered(_) => "bordered ldlt",
        };
        f.debug_struct("Factorization").field("n", &self.n).field("kind", &kind).finish()
    }
}

/// Backward error above which a factorization is treated as numerically singular.
const SINGULAR_RESIDUAL: f64 = 1e-8;
/// Refinement steps after an `LDL^T` solve.
const REFINEMENT_STEPS: usize = 4;

fn sparse_lu(a: &SparseMatrix) -> Result<Lu<usize, f64>> {
    let n = a.nrows();
    let symbolic = SymbolicSparseRowMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
    let view = SparseRowMatRef::new(symbolic, a.values());
    view.sp_lu().map_err(|e| match e {
        LuError::SymbolicSingular { index } => IcddError::Singular { pivot: Some(index) },
        LuError::Generic(_) => IcddError::Singular { pivot: None },
    })
}

fn sparse_ldlt(a: SparseMatrix, signs: &[i8]) -> Result<Ldlt> {
    let n = a.nrows();
    if signs.len() != n {
        return Err(IcddError::DimensionMismatch { expected: n, got: signs.len() });
    }
    let scale = a.max_abs();
    if a.asymmetry() > 1e-14 * scale {
        return Err(IcddError::InvalidParameter("signed pivoting needs a symmetric matrix".into()));
    }
    let oom = |_| IcddError::Degenerate("out of memory in sparse factorization".into());
    // the row storage of a symmetric matrix is also its column storage
    let pattern = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
    let symbolic = factorize_symbolic_cholesky(pattern, Side::Lower, SymmetricOrdering::Amd, Default::default())
        .map_err(|_| IcddError::Degenerate("symbolic factorization failed".into()))?;
    let mut values = vec![0.0; symbolic.len_val()];
    let mut mem = MemBuffer::try_new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()))
        .map_err(oom)?;
    let regularization = LdltRegularization {
        dynamic_regularization_signs: Some(signs),
        dynamic_regularization_delta: 1e-8 * scale,
        dynamic_regularization_epsilon: 1e-13 * scale,
    };
    symbolic
        .factorize_numeric_ldlt::<f64>(
            &mut values,
            SparseColMatRef::new(pattern, a.values()),
            Side::Lower,
            regularization,
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        )
        .map_err(|_| IcddError::Singular { pivot: None })?;
    Ok(Ldlt { symbolic, values, matrix: a })
}

impl Ldlt {
    fn apply_inverse(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = b.to_vec();
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(&mut x, n, 1),
            Par::Seq,
            MemStack::new(&mut mem),
        );
        x
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.apply_inverse(b);
        let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for _ in 0..REFINEMENT_STEPS {
            let ax = self.matrix.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let rnorm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rnorm <= 1e-15 * bnorm.max(f64::MIN_POSITIVE) {
                break;
            }
            let dx = self.apply_inverse(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        }
        x
    }
}

impl Solver {
    fn new(a: SparseMatrix, pivoting: Pivoting) -> Result<Self> {
        match pivoting {
            Pivoting::Partial => sparse_lu(&a).map(Solver::Lu),
            Pivoting::Signs(s) => sparse_ldlt(a, s).map(|f| Solver::Ldlt(Box::new(f))),
        }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Solver::Lu(lu) => {
                let rhs = Col::<f64>::from_fn(b.len(), |i| b[i]);
                let x = lu.solve(&rhs);
                (0..b.len()).map(|i| x[i]).collect()
            }
            Solver::Ldlt(f) => f.solve(b),
        }
    }
}

fn check_square(a: &SparseMatrix) -> Result<()> {
    if a.ncols() != a.nrows() {
        return Err(IcddError::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
    }
    if a.nrows() == 0 {
        return Err(IcddError::Degenerate("empty matrix".into()));
    }
    Ok(())
}

/// Rejects factorizations whose probe solve has a large backward error.
fn probe(a: &SparseMatrix, f: Factorization) -> Result<Factorization> {
    let ones = vec![1.0; a.nrows()];
    let b = a.mul_vec(&ones);
    let x = f.solve(&b)?;
    let r = a.mul_vec(&x);
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(a.max_abs());
    let res = r.iter().zip(&b).fold(0.0f64, |m, (ri, bi)| m.max((ri - bi).abs()));
    if res <= SINGULAR_RESIDUAL * scale {
        Ok(f)
    } else {
        Err(IcddError::Singular { pivot: None })
    }
}

/// Factorizes `a` with partial pivoting.
///
/// A structurally singular matrix reports the failing pivot. Numerical
/// singularity is detected by a probe solve whose residual must stay small.
pub fn factorize(a: &SparseMatrix) -> Result<Factorization> {
    factorize_with(a, Pivoting::Partial)
}

pub fn factorize_with(a: &SparseMatrix, pivoting: Pivoting) -> Result<Factorization> {
    check_square(a)?;
    let solver = Solver::new(a.clone(), pivoting)?;
    probe(a, Factorization { n: a.nrows(), inner: Inner::Plain(solver) })
}

/// Factorizes a matrix whose last row and column are dense, such as a
/// zero-mean constraint.
///
/// The leading block `K` may be singular with a one-dimensional kernel that
/// the border removes. `K + s e_pin e_pin^T` is factorized instead and the
/// exact solution is recovered from a 2x2 system, so the border never enters
/// the sparse factors.
pub fn factorize_bordered(a: &SparseMatrix, pin: usize) -> Result<Factorization> {
    factorize_bordered_with(a, pin, Pivoting::Partial)
}

/// As [`factorize_bordered`]; signs apply to the leading block.
pub fn factorize_bordered_with(a: &SparseMatrix, pin: usize, pivoting: Pivoting) -> Result<Factorization> {
    check_square(a)?;
    let n = a.nrows();
    let m = n - 1;
    if pin >= m {
        return Err(IcddError::InvalidParameter(format!("pin {pin} outside leading block of size {m}")));
    }
    let mut t = Vec::with_capacity(a.nnz());
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut d = 0.0;
    for r in 0..n {
        for (c, val) in a.row(r) {
            match (r == m, c == m) {
                (false, false) => t.push((r, c, val)),
                (false, true) => u[r] = val,
                (true, false) => v[c] = val,
                (true, true) => d = val,
            }
        }
    }
    let diag = a.get(pin, pin).abs();
    let mut shift = if diag > 0.0 { diag } else { a.max_abs() };
    if let Pivoting::Signs(s) = pivoting {
        if s.get(pin).is_some_and(|&v| v < 0) {
            shift = -shift;
        }
    }
    t.push((pin, pin, shift));
    let k = SparseMatrix::from_triplets(m, m, &t)?;
    let lu = Solver::new(k, pivoting)?;
    let mut e = vec![0.0; m];
    e[pin] = 1.0;
    let b = lu.solve(&e);
    let c = lu.solve(&u);
    // (1 - s b_k) x_k + c_k lambda = a_k
    // s (v.b) x_k + (d - v.c) lambda = g - v.a
    let m2 = [[1.0 - shift * b[pin], c[pin]], [shift * dot(&v, &b), d - dot(&v, &c)]];
    let det = m2[0][0] * m2[1][1] - m2[0][1] * m2[1][0];
    let scale = (m2[0][0].abs() + m2[0][1].abs()) * (m2[1][0].abs() + m2[1][1].abs());
    if !(det.abs() > 1e-14 * scale) || !det.is_finite() {
        return Err(IcddError::Singular { pivot: Some(m) });
    }
    let inv = [[m2[1][1] / det, -m2[0][1] / det], [-m2[1][0] / det, m2[0][0] / det]];
    let border = Border { lu, pin, shift, v, b, c, inv };
    probe(a, Factorization { n, inner: Inner::Bordered(Box::new(border)) })
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(IcddError::DimensionMismatch { expected: self.n, got: rhs.len() });
        }
        let out = match &self.inner {
            Inner::Plain(s) => s.solve(rhs),
            Inner::Bordered(bd) => {
                let m = self.n - 1;
                let a = bd.lu.solve(&rhs[..m]);
                let r = [a[bd.pin], rhs[m] - dot(&bd.v, &a)];
                let xk = bd.inv[0][0] * r[0] + bd.inv[0][1] * r[1];
                let lambda = bd.inv[1][0] * r[0] + bd.inv[1][1] * r[1];
                let mut x: Vec<f64> = (0..m).map(|i| a[i] + bd.shift * xk * bd.b[i] - lambda * bd.c[i]).collect();
                x.push(lambda);
                x
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(IcddError::Singular { pivot: None });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve_is_identity() {
        let f = factorize(&SparseMatrix::identity(4)).unwrap();
        assert_eq!(f.solve(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn pivoting_swaps() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let x = factorize(&a).unwrap().solve(&[3.0, 5.0]).unwrap();
        assert!((x[0] - 5.0).abs() < 1e-14 && (x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_reported() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(factorize(&a), Err(IcddError::Singular { .. })));
        let z = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(matches!(factorize(&z), Err(IcddError::Singular { .. })));
    }

    #[test]
    fn rectangular_rejected() {
        let a = SparseMatrix::zeros(2, 3);
        assert!(matches!(factorize(&a), Err(IcddError::DimensionMismatch { .. })));
    }

    #[test]
    fn bordered_matches_plain() {
        // singular 1D Neumann Laplacian bordered by a mean constraint
        let n = 6;
        let mut rows = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..n {
            if i > 0 {
                rows[i][i - 1] = -1.0;
                rows[i][i] += 1.0;
            }
            if i + 1 < n {
                rows[i][i + 1] = -1.0;
                rows[i][i] += 1.0;
            }
            rows[i][n] = 1.0;
            rows[n][i] = 1.0;
        }
        let a = SparseMatrix::from_dense(&rows);
        let rhs: Vec<f64> = (0..=n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x1 = factorize(&a).unwrap().solve(&rhs).unwrap();
        let x2 = factorize_bordered(&a, 2).unwrap().solve(&rhs).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn signed_ldlt_matches_lu() {
        // quasi-definite: [[2, 1, 1], [1, 3, 0], [1, 0, -1]]
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0, 1.0], vec![1.0, 3.0, 0.0], vec![1.0, 0.0, -1.0]]);
        let rhs = [1.0, -2.0, 0.5];
        let x1 = factorize(&a).unwrap().solve(&rhs).unwrap();
        let x2 = factorize_with(&a, Pivoting::Signs(&[1, 1, -1])).unwrap().solve(&rhs).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn signed_ldlt_rejects_unsymmetric() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![0.0, -1.0]]);
        assert!(factorize_with(&a, Pivoting::Signs(&[1, -1])).is_err());
        let s = SparseMatrix::identity(2);
        assert!(matches!(factorize_with(&s, Pivoting::Signs(&[1])), Err(IcddError::DimensionMismatch { .. })));
    }

    #[test]
    fn bordered_signed_matches_plain() {
        // 1D Neumann Laplacian (velocity-like, positive) coupled to a pressure
        // block with constant kernel, bordered by a mean constraint on pressure
        let (nu, np) = (3, 3);
        let n = nu + np;
        let mut rows = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..nu {
            rows[i][i] = 4.0;
        }
        for (i, j) in [(0, 3), (1, 4), (2, 5), (0, 4)] {
            rows[i][j] = 1.0;
            rows[j][i] = 1.0;
        }
        for i in 0..np {
            for j in 0..np {
                rows[nu + i][nu + j] = if i == j { -2.0 } else { 1.0 };
            }
            rows[nu + i][n] = 1.0;
            rows[n][nu + i] = 1.0;
        }
        let a = SparseMatrix::from_dense(&rows);
        let signs = [1, 1, 1, -1, -1, -1];
        let rhs: Vec<f64> = (0..=n).map(|i| (i as f64 * 1.3).cos()).collect();
        let x1 = factorize(&a).unwrap().solve(&rhs).unwrap();
        let x2 = factorize_bordered_with(&a, nu, Pivoting::Signs(&signs)).unwrap().solve(&rhs).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-12, "{x1:?} {x2:?}");
        }
    }
}
