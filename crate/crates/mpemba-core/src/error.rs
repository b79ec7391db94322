use crate::prelude::*;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("antiferromagnetic state needs an even number of sites, got N={0}")]
    OddAntiferro(usize),
    #[error("state of 2^{needed:.1} amplitudes exceeds the memory cap 2^{cap:.1}")]
    MemoryCap { needed: f64, cap: f64 },
    #[error("bond dimension {chi} on bond {bond} exceeds cap {cap} at layer {layer}")]
    BondOverflow { layer: usize, bond: usize, chi: usize, cap: usize },
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("time grids differ")]
    GridMismatch,
    #[error("density matrix has eigenvalue {0:e} below the -1e-8 floor")]
    NegativeEigenvalue(f64),
    #[error("linear algebra failure: {0}")]
    Linalg(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid { field, reason: reason.into() }
}
