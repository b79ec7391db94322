//! Pairwise crossing times of asymmetry traces and the quadratic fit
//! `t_M = a + b N_A^2` across subsystem sizes.

use crate::error::{HarnessError, Result};
use crate::output::{num, read_trace, Table};
use mpemba_core::fit::{quadratic_in, LinearFit};
use mpemba_core::replica_tn::mpemba_crossing_time;
use mpemba_core::trace::AsymmetryTrace;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub low: String,
    pub high: String,
    pub theta_low: f64,
    pub theta_high: f64,
    pub n_a: usize,
    /// First time the initially lower curve overtakes the other.
    pub t_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingFit {
    pub theta_low: f64,
    pub theta_high: f64,
    pub points: usize,
    pub fit: LinearFit,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompareReport {
    pub crossings: Vec<Crossing>,
    pub fits: Vec<CrossingFit>,
}

fn comparable(a: &AsymmetryTrace, b: &AsymmetryTrace) -> bool {
    let (m, n) = (&a.meta, &b.meta);
    m.n_a == n.n_a && m.observable == n.observable && m.estimator == n.estimator && m.state == n.state && m.q == n.q && m.n_sites == n.n_sites && m.theta != n.theta
}

/// Crossings of every comparable pair of traces; `names[k]` labels `traces[k]`.
pub fn compare_traces(names: &[String], traces: &[AsymmetryTrace]) -> Result<CompareReport> {
    if traces.len() < 2 {
        return Err(HarnessError::Usage(format!("compare needs at least 2 traces, got {}", traces.len())));
    }
    let mut report = CompareReport::default();
    for i in 0..traces.len() {
        for j in i + 1..traces.len() {
            let (a, b) = (&traces[i], &traces[j]);
            if !comparable(a, b) {
                continue;
            }
            if a.times != b.times {
                return Err(HarnessError::field("traces", format!("time grids of {} and {} differ", names[i], names[j])));
            }
            let (lo, hi) = if a.meta.theta < b.meta.theta { (i, j) } else { (j, i) };
            let (l, h) = (&traces[lo], &traces[hi]);
            let first_low = l.values.first().copied().unwrap_or(f64::NAN) < h.values.first().copied().unwrap_or(f64::NAN);
            let t_m = if first_low { mpemba_crossing_time(l, h)? } else { None };
            report.crossings.push(Crossing { low: names[lo].clone(), high: names[hi].clone(), theta_low: l.meta.theta, theta_high: h.meta.theta, n_a: l.meta.n_a, t_m });
        }
    }
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for c in &report.crossings {
        if !keys.contains(&(c.theta_low, c.theta_high)) {
            keys.push((c.theta_low, c.theta_high));
        }
    }
    for (tl, th) in keys {
        let mut pts: Vec<(f64, f64)> = report.crossings.iter().filter(|c| c.theta_low == tl && c.theta_high == th).filter_map(|c| c.t_m.map(|t| (c.n_a as f64, t))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        if pts.len() >= 3 {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
            report.fits.push(CrossingFit { theta_low: tl, theta_high: th, points: pts.len(), fit: quadratic_in(&x, &y)? });
        }
    }
    Ok(report)
}

pub fn compare_files(paths: &[PathBuf]) -> Result<CompareReport> {
    let traces = paths.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = paths.iter().map(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()).collect();
    compare_traces(&names, &traces)
}

impl CompareReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        for c in &self.crossings {
            let t = c.t_m.map(|t| format!("t_M = {t:.4}")).unwrap_or_else(|| "no crossing".into());
            let _ = writeln!(s, "N_A={} theta {} vs {}: {t}", c.n_a, c.theta_low, c.theta_high);
        }
        for f in &self.fits {
            let _ = writeln!(s, "theta {} vs {}: t_M = {:.4} + {:.6} N_A^2, R^2 = {:.5} ({} points)", f.theta_low, f.theta_high, f.fit.intercept, f.fit.slope, f.fit.r2, f.points);
        }
        s
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut cross = Table::new("compare_crossings.csv", &["low", "high", "theta_low", "theta_high", "n_a", "t_m"]).meta("observable", "crossing_time");
        for c in &self.crossings {
            cross.push(vec![c.low.clone(), c.high.clone(), c.theta_low.to_string(), c.theta_high.to_string(), c.n_a.to_string(), c.t_m.map(num).unwrap_or_else(|| "none".into())]);
        }
        let mut fits = Table::new("compare_fit.csv", &["theta_low", "theta_high", "points", "a", "b", "a_se", "b_se", "r2"]).meta("model", "a+b*n_a^2");
        for f in &self.fits {
            fits.push(vec![
                f.theta_low.to_string(),
                f.theta_high.to_string(),
                f.points.to_string(),
                num(f.fit.intercept),
                num(f.fit.slope),
                num(f.fit.intercept_se),
                num(f.fit.slope_se),
                num(f.fit.r2),
            ]);
        }
        vec![cross, fits]
    }
}
