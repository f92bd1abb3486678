#![cfg_attr(not(feature = "std"), no_std)]
//! Linear stochastic approximation with a constant step-size and
//! Polyak-Ruppert iterate averaging.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. File formats, the command-line front end and parallel
//! replication live in the companion `lsa-lab` crate.

extern crate alloc;

pub mod bounds;
pub mod engine;
mod error;
pub mod linalg;
pub mod problems;
pub mod spectral;
pub mod td;
pub mod transform;
pub mod tuner;

pub use error::{LsaError, Result};
pub use problems::{Moments, ProblemDistribution};
