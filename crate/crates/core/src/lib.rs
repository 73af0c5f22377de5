//! Overlapping Stokes-Darcy coupling by interface control.
//!
//! Free flow (Stokes) and porous flow (Darcy) share a strip `y_f < y < 0`.
//! The Stokes velocity trace on `y = y_f` and the Darcy pressure trace on
//! `y = 0` are solved for by BiCGStab on the interface system; see
//! [`icdd::IcddProblem`]. The strip depth follows from the porosity through
//! [`homogenization::delta_star`], the permeability from the periodic cell
//! problem in [`homogenization::solve_cell_problem`], and
//! [`dns::solve_dns`] gives a pore-resolved reference for [`validation`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dns;
pub mod error;
pub mod fem;
pub mod homogenization;
pub mod icdd;
pub mod linalg;
pub mod mesh;
pub mod presets;
pub mod validation;

pub use error::{IcddError, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/discretization.md")]
    mod discretization {}
    #[doc = include_str!("../../../book/src/sparse_linalg.md")]
    mod sparse_linalg {}
    #[doc = include_str!("../../../book/src/interface_solver.md")]
    mod interface_solver {}
    #[doc = include_str!("../../../book/src/homogenization.md")]
    mod homogenization {}
    #[doc = include_str!("../../../book/src/microscale.md")]
    mod microscale {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
