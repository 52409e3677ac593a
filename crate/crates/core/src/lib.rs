//! Density-based topology optimization under design-dependent pressure loads.
//!
//! The pressure acting on a structure is recovered from the design itself:
//! a Darcy-type flow problem with a drainage term projects the applied
//! boundary pressure into the current void space, a design-independent
//! transformation matrix converts the pressure field into consistent nodal
//! loads, and adjoint sensitivity analysis feeds an MMA optimizer. Both
//! compliance-minimal structures and pressure-actuated compliant mechanisms
//! (multi-criteria objective) are supported, in 2D and 3D.
//!
//! Entry points:
//! - [`problems::catalog`] builds the benchmark problem definitions,
//! - [`driver::Pipeline`] assembles and solves one design,
//! - [`driver::run`] executes the full optimization loop,
//! - the `pressto` binary wraps all of this behind a CLI.

pub mod config;
pub mod darcy;
pub mod driver;
pub mod elastic;
pub mod error;
pub mod export;
pub mod fdcheck;
pub mod fields;
pub mod grid;
pub mod mma;
pub mod problems;
pub mod sensitivity;
pub mod solver;

pub use error::Error;
