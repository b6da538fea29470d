//! Data-driven output regulation.
//!
//! Given finite input/state samples of an unknown discrete-time endosystem
//!
//! ```text
//! x2(t+1) = A2 x2(t) + B2 u(t) + A3 x1(t)
//! ```
//!
//! driven by a known exosystem `x1(t+1) = A1 x1(t)`, this crate decides whether
//! the samples are informative for regulator design and, when they are,
//! computes a single state feedback `u = K1 x1 + K2 x2` that makes
//! `A2 + B2 K2` stable and drives `z = D1 x1 + D2 x2 + E u` to zero for every
//! `(A2, B2)` consistent with the data.
//!
//! The pieces:
//!
//! - [`model`]: data matrices, known matrices, the compatible set of systems.
//! - [`analysis`]: spectra, Sylvester and classical regulator equations.
//! - [`lmi`]: search for a right inverse of `X2-` with a stable data-driven
//!   closed loop.
//! - [`synthesis`]: the two informativity conditions and regulator synthesis.
//! - [`simulation`]: data generation, closed-loop simulation, decay checks.
//! - [`io`]: problem/regulator/system files and trajectory CSV.
//! - [`cli`]: the `ddreg` command line.
//!
//! Runnable walkthroughs live in `examples/` (`cargo run --example <name>`).

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod scenarios;
pub mod simulation;
pub mod synthesis;

pub use error::{Error, Result};
pub use model::{
    compatible_set, compatible_set_unknown_a3, CompatibleSet, KnownMatrices, Problem, ProblemData,
    Provenance, Regulator, TrueSystem,
};
pub use synthesis::{synthesize, synthesize_unknown_a3, SynthesisConfig, SynthesisReport};

/// Dense real matrix used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
