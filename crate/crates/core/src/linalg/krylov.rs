use super::{dot, norm2};
use crate::error::{IcddError, Result};

/// A linear map `x -> A x` applied matrix-free. Application may fail when it
/// involves inner solves.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl LinearOperator for super::SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mul_vec(x))
    }
}

/// Wraps a closure as an operator of dimension `n`.
pub struct FnOperator<F> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Result<Vec<f64>>> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    /// Relative residual target `||b - A x|| / ||b||`.
    pub tol: f64,
    pub max_iter: usize,
    /// `|rho|` below `breakdown * ||r_hat|| ||r||` counts as breakdown.
    pub breakdown: f64,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig { tol: 1e-8, max_iter: 200, breakdown: 1e-14 }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(IcddError::InvalidParameter(format!("tolerance {} not in (0, 1)", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(IcddError::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual after each iteration, starting with the initial one.
    pub history: Vec<f64>,
    /// Relative residual recomputed from scratch with the returned `x`.
    pub true_residual: f64,
}

/// Unpreconditioned BiCGStab starting from zero.
///
/// On breakdown the iteration restarts once from the current iterate with a
/// perturbed shadow residual; a second breakdown is reported as an error.
/// Convergence is confirmed against the true residual before returning.
pub fn bicgstab<A: LinearOperator + ?Sized>(a: &A, b: &[f64], cfg: &KrylovConfig) -> Result<KrylovOutcome> {
    cfg.validate()?;
    let n = a.dim();
    if b.len() != n {
        return Err(IcddError::DimensionMismatch { expected: n, got: b.len() });
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(KrylovOutcome { x, iterations: 0, history: vec![0.0], true_residual: 0.0 });
    }
    let mut history = vec![1.0];
    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let mut restarted = false;
    let mut it = 0;

    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];

    let true_res = |x: &[f64]| -> Result<(Vec<f64>, f64)> {
        let ax = a.apply(x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let nr = norm2(&r) / bnorm;
        Ok((r, nr))
    };

    while it < cfg.max_iter {
        let rho_new = dot(&r_hat, &r);
        let broke = rho_new.abs() <= cfg.breakdown * norm2(&r_hat) * norm2(&r) || !rho_new.is_finite();
        if broke || omega == 0.0 {
            if restarted {
                return Err(IcddError::Breakdown { iterations: it });
            }
            restarted = true;
            let rn = norm2(&r);
            r_hat = r
                .iter()
                .enumerate()
                .map(|(i, ri)| ri + 1e-3 * rn / (n as f64).sqrt() * if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = a.apply(&p)?;
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            omega = 0.0;
            continue;
        }
        alpha = rho / rv;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        it += 1;
        if norm2(&s) / bnorm <= cfg.tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            let (tr, nr) = true_res(&x)?;
            history.push(nr);
            if nr <= cfg.tol {
                return Ok(KrylovOutcome { x, iterations: it, history, true_residual: nr });
            }
            r = tr;
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let t = a.apply(&s)?;
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm2(&r) / bnorm;
        if rel <= cfg.tol {
            let (tr, nr) = true_res(&x)?;
            history.push(nr);
            if nr <= cfg.tol {
                return Ok(KrylovOutcome { x, iterations: it, history, true_residual: nr });
            }
            r = tr;
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
        } else {
            history.push(rel);
        }
    }
    let (_, nr) = true_res(&x)?;
    Err(IcddError::NotConverged { iterations: it, residual: nr })
}
