//! Numerical calculus on sampled rough paths.
//!
//! The crate provides dense arithmetic in the truncated tensor group,
//! signatures of piecewise-linear paths with p-variation metrics, Ito and
//! Stratonovich level-2 lifts of simulated martingales, a rough
//! differential equation solver with solution enhancement, an averaging
//! scheme that rebuilds the Ito solution from discounted Stratonovich
//! flows, a pathwise decomposition of the chain rule with Young cross
//! integrals, and statistical moment-equivalence checks.
//!
//! A narrative guide with runnable examples lives in `book/`; the same
//! chapters are compiled as doctests through the [`guide`] module.

pub mod averaging;
pub mod bdg;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod guide;
pub mod io;
pub mod itolemma;
pub mod lift;
pub mod pvar;
pub mod rde;
pub mod rng;
pub mod sig;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use grid::{GridPath, Partition};
pub use sig::{RoughPathGrid, SignaturePath};
pub use tensor::TruncatedTensor;
