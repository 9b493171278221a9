//! Parameter-aware sparse identification of 1D PDEs and subgrid-scale
//! closures.
//!
//! The crate covers the full pipeline: finite-difference simulation of heat,
//! Burgers and KdV-Burgers equations with Perlin initial conditions, box
//! filtering and true subgrid-scale stress extraction, parameter-aware
//! candidate-term libraries with dimensional filtering, memory-efficient
//! Gram-matrix regression with sparse solvers, ensemble consensus selection,
//! and closure benchmarking.
//!
//! See the `examples/` directory for one runnable example per capability; the
//! `sindy1d` binary exposes the same pipelines as batch subcommands.
//!
//! Validation uses negated comparisons like `!(x > 0.0)` on purpose: they
//! reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod filtering;
pub mod gram;
pub mod grid;
pub mod library;
pub mod perlin;
pub mod report;
pub mod rng;
pub mod sgs;
pub mod simulate;
pub mod solvers;

pub use error::{Error, Result};
