//! Finite-element solver for nearly incompressible Stokes flow with Tresca
//! friction on part of the boundary.
//!
//! The divergence constraint is relaxed to `div u in [-eps, eps]`. An outer
//! fixed-point loop updates the pressure ([`outer::run_nisp`]); each outer
//! step solves the velocity problem at frozen pressure with ADMM
//! ([`admm::run_nisv`]).

// `!(x > 0.0)` is used on purpose to reject NaN; assembly loops index several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admm;
pub mod assembly;
pub mod checks;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod oracle;
pub mod outer;

pub use error::{Error, Result};
