//! Few-photon transport in a three-cavity optomechanical chain.
//!
//! The chain is a left cavity `L`, an optomechanical cavity `C` coupled to a
//! mechanical mode `b`, and a right cavity `R`. Everything is expressed in
//! units of the mechanical frequency (ω_m = 1). Mode order is always
//! `(L, C, R, b)`.
//!
//! The crate builds without `std` (it needs `alloc`). The `std` feature turns
//! on faer's std support and the `parallel` feature parallel sweeps.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod fock;
pub mod liouville;
mod math;
pub mod model;
pub mod sparse;
pub mod transport;
pub mod weakdrive;

pub use num_complex::Complex64 as C64;

use alloc::string::String;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operands live on different Fock spaces")]
    SpaceMismatch,
    #[error("steady state is not unique (degenerate steady manifold)")]
    NonUniqueSteadyState,
    #[error("linear solver failed, residual {residual:e}")]
    SolverFailure { residual: f64 },
    #[error("trace drift {drift:e} exceeds tolerance; reduce the step size")]
    StepSize { drift: f64 },
    #[error("amplitude system is singular (condition estimate {condition:e})")]
    ExceptionalPoint { condition: f64 },
    #[error("closed form has a pole: {0} vanishes")]
    Pole(&'static str),
    #[error("formula outside its domain: {0}")]
    FormulaDomain(String),
    #[error("truncation did not converge within the cutoff budget")]
    NonConverged,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
