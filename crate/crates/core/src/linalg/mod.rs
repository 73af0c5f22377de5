//! Sparse storage, direct factorization and the BiCGStab driver.

mod krylov;
mod lu;
mod market;
mod sparse;

pub use krylov::{bicgstab, FnOperator, KrylovConfig, KrylovOutcome, LinearOperator};
pub use lu::{factorize, factorize_bordered, factorize_bordered_with, factorize_with, Factorization, Pivoting};
pub use market::{read_matrix_market, read_vector_market, write_matrix_market, write_vector_market};
pub use sparse::{CsrPattern, SparseMatrix};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
