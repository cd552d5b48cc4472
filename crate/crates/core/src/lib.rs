//! Exact numerics and simulation for directed polymers in random environment,
//! last-passage percolation and spatially inhomogeneous TASEP.
//!
//! The crate is organized bottom-up:
//!
//! * [`specfun`] log-gamma, digamma, trigamma, inverse digamma, monotone roots
//! * [`convex`] grid Legendre transforms, infimal convolution, one-sided Cramér rates
//! * [`env`] speed functions and counter-based random environments
//! * [`lattice`] last-passage and log-partition dynamic programming
//! * [`loggamma`] the exactly solvable log-gamma polymer and its rate functions
//! * [`tasep`] event-driven TASEP, ξ-processes, the envelope coupling
//! * [`hydro`] macroscopic shapes, variational formulas and density profiles
//! * [`mc`] deterministic parallel replicas and statistical tests
//! * [`cli`] the experiment driver behind the `growthlab` binary
//!
//! Runnable examples live in `examples/`, one per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod convex;
pub mod env;
mod error;
pub mod hydro;
pub mod lattice;
pub mod loggamma;
pub mod mc;
pub mod specfun;
pub mod tasep;

pub use error::{Error, Result};
