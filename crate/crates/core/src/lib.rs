//! Connectivity analysis and optimization of Markov chains on weighted
//! directed graphs.
//!
//! The objective is a weighted sum of mean first passage times
//! `S(P, C) = sum_ij C_ij M_ij`. The optimizer is a projected SPSA recursion
//! whose perturbations stay inside the linear constraints, with support for
//! random edge failures. See the `examples/` directory for one program per
//! capability.

pub mod chain;
pub mod cli;
pub mod descent;
pub mod directions;
pub mod error;
pub mod graph;
pub mod instances;
pub mod io;
pub mod oracles;
pub mod projection;
pub mod random_support;
pub mod spsa;
pub mod surveillance;
pub mod verify;

pub use error::{Error, Result};
