#![cfg_attr(not(feature = "std"), no_std)]

//! Engines for entanglement asymmetry in U(1)-symmetric random circuits.
//!
//! Four independent routes to the same observables: exact statevector
//! sampling ([`qudit_sim`], [`asymmetry_exact`]), the Haar-averaged two-replica
//! tensor network ([`replica_tn`]), the large-q Markov process ([`ssep_largeq`])
//! and closed-form asymptotics ([`mft_predictors`]).

extern crate alloc;

pub mod asymmetry_exact;
pub mod error;
pub mod fit;
pub mod mft_predictors;
pub mod qudit_sim;
pub mod replica_tn;
pub mod rng;
pub mod ssep_largeq;
pub mod stats;
pub mod trace;

mod prelude;

pub use error::{Error, Result};
pub use num_complex::Complex64;
