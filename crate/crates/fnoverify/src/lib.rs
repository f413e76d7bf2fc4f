//! Verification toolkit for tiny Fourier neural operator surrogates of the
//! 1D advection-diffusion-reaction equation.
//!
//! The pipeline: train a small FNO by random-feature regression, compile it
//! exactly into a stack of dense affine layers, emit a QF_LRA SMT-LIB2
//! query for a physics property (positivity or mass non-increase) over a
//! continuous set of smooth inputs, run an external solver, and decode
//! sound proofs or sound counterexamples. Monte Carlo and projected
//! finite-difference ascent provide falsification baselines on the original
//! model.

pub mod constraints;
mod dft;
pub mod error;
pub mod field;
pub mod fno;
pub mod pde;
pub mod pln;
pub mod rational;
pub mod smt;
pub mod solver;
pub mod train;

pub use error::{Error, Result};
pub use field::{Field, Grid};
