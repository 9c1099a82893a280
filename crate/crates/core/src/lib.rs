//! Coupled sparsity-regularized reconstruction for limited-arc digital
//! breast tomosynthesis.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`], [`geometry`], [`io`]: volumes, projection sets, scan
//!   geometry and the raw file format.
//! - [`operators`]: the linear operators (X-ray transform, blurs, the
//!   square-root ramp filter, finite differences) behind one trait.
//! - [`prox`] and [`solver`]: proximal maps and a multi-block PDHG solver.
//! - [`pipeline`]: preprocessing, the coupled low-resolution problem,
//!   high-resolution refinement and display formation.
//! - [`sim`]: phantoms and simulated scans with known ground truth.
//! - [`config`], [`cli`], [`verify`]: run configuration, the command-line
//!   front end, and the built-in verification suites.

pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod operators;
pub mod pipeline;
pub mod prox;
pub mod sim;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
