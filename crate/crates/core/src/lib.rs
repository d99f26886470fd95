//! Sample-complexity bounds for certifying sampling distributions from
//! classical samples, together with exact desk-scale simulators for the
//! ensembles those bounds are applied to: IQP circuits, Haar-random and
//! local random circuits, and boson sampling.
//!
//! The crate is organised bottom-up:
//!
//! - [`distvec`]: probability vectors, truncation operators, quasi-norms and
//!   Rényi entropies.
//! - [`bounds`]: closed-form lower and upper sample-complexity bounds.
//! - [`qsim`]: qubit ensembles and i.i.d. sampling from a distribution.
//! - [`boson`]: permanents, Fock-space enumeration and the Gaussian-measure
//!   tail machinery.
//! - [`moments`]: Monte-Carlo second moments, min-entropy tails and
//!   anti-concentration.
//! - [`certtest`]: a calibrated identity tester and an empirical
//!   sample-complexity harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boson;
pub mod bounds;
pub mod certtest;
pub mod distvec;
mod error;
pub mod linalg;
pub mod moments;
pub mod qsim;
pub mod rng;

pub use error::{Error, Result};
