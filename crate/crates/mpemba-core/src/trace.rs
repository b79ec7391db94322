//! Time series shared by every engine and by the CSV layer.

use crate::prelude::*;
use crate::qudit_sim::ProductKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Quenched,
    AnnealedExact,
    AnnealedTn,
    MonteCarlo,
    Prediction,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Quenched => "quenched",
            Estimator::AnnealedExact => "annealed_exact",
            Estimator::AnnealedTn => "annealed_tn",
            Estimator::MonteCarlo => "monte_carlo",
            Estimator::Prediction => "prediction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "quenched" => Estimator::Quenched,
            "annealed_exact" => Estimator::AnnealedExact,
            "annealed_tn" => Estimator::AnnealedTn,
            "monte_carlo" => Estimator::MonteCarlo,
            "prediction" => Estimator::Prediction,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Asymmetry,
    PurityA,
    PurityAQ,
    SplusSquared,
}

impl Observable {
    pub fn as_str(self) -> &'static str {
        match self {
            Observable::Asymmetry => "asymmetry",
            Observable::PurityA => "purity",
            Observable::PurityAQ => "decohered_purity",
            Observable::SplusSquared => "splus_sq",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "asymmetry" => Observable::Asymmetry,
            "purity" => Observable::PurityA,
            "decohered_purity" => Observable::PurityAQ,
            "splus_sq" => Observable::SplusSquared,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceMeta {
    pub theta: f64,
    pub n_sites: usize,
    pub n_a: usize,
    pub q: usize,
    pub state: ProductKind,
    pub estimator: Estimator,
    pub observable: Observable,
    pub renyi: f64,
}

/// Values (in nats for asymmetries) on an integer layer grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetryTrace {
    pub times: Vec<usize>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub meta: TraceMeta,
}

impl AsymmetryTrace {
    pub fn new(meta: TraceMeta) -> Self {
        AsymmetryTrace { times: Vec::new(), values: Vec::new(), errors: Vec::new(), meta }
    }

    pub fn push(&mut self, t: usize, value: f64, error: f64) {
        self.times.push(t);
        self.values.push(value);
        self.errors.push(error);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn value_at(&self, t: usize) -> Option<f64> {
        self.times.iter().position(|&s| s == t).map(|k| self.values[k])
    }
}
