//! Orchestration around `mpemba-core`: flat configs, engine dispatch, CSV
//! traces with self-describing headers, crossing reports and the acceptance
//! suite.

pub mod accept;
pub mod cli;
pub mod compare;
pub mod config;
pub mod engines;
pub mod error;
pub mod output;

pub use config::{Engine, ExperimentConfig};
pub use error::{HarnessError, Result};
