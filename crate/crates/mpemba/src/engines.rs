//! One function per engine: config in, tables out. Nothing touches the disk here.
//!
//! Work is split into independent tasks (realizations, angles, trajectories)
//! run on the rayon pool; each task owns its counter-based RNG stream and
//! results are collected in index order, so output does not depend on the
//! schedule.

use crate::config::{Engine, ExperimentConfig, Modes, SplusEstimator};
use crate::error::Result;
use crate::output::{num, Table};
use mpemba_core::asymmetry_exact::{purity_statistics, reduce_realizations, simulate_realization, AverageMode, EnsembleSpec};
use mpemba_core::mft_predictors::{
    envelope_crossing_time, mft_g, mft_mu, predict_asymmetry_envelope, predict_splus_decay, purity_rate_remainder, purity_rate_series, s2_density,
    saddle_initial_asymmetry, short_time_asymmetry,
};
use mpemba_core::qudit_sim::{sample_layer, ChainSpec, splus_expectation, tilted_product_state};
use mpemba_core::replica_tn::{annealed_asymmetry_tn_multi, splus_trace_tn, LayerLog};
use mpemba_core::rng;
use mpemba_core::ssep_largeq::{build_kernels, density_profile, purity_initial, reduce_purity_rate, run_checkpoints, run_trajectory, KernelSamplers};
use mpemba_core::stats::mean_se;
use mpemba_core::trace::{AsymmetryTrace, Estimator, Observable, TraceMeta};
use rayon::prelude::*;

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.engine {
        Engine::Exact => exact(cfg),
        Engine::Tn => tn(cfg),
        Engine::Ssep => ssep(cfg),
        Engine::Mft => mft(cfg),
        Engine::Opspread => opspread(cfg),
    }
}

fn modes(m: Modes) -> &'static [AverageMode] {
    match m {
        Modes::Quenched => &[AverageMode::Quenched],
        Modes::Annealed => &[AverageMode::Annealed],
        Modes::Both => &[AverageMode::Quenched, AverageMode::Annealed],
    }
}

fn exact(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let chain = cfg.chain()?;
    let mut out = RunOutput::default();
    for &n_a in &cfg.n_a {
        let spec = EnsembleSpec { chain, states: cfg.thetas.iter().map(|&t| cfg.product(t)).collect(), a: cfg.subsystem(n_a), t_max: cfg.t_max, renyi: cfg.renyi };
        spec.check()?;
        let samples = (0..cfg.realizations as u64).into_par_iter().map(|i| simulate_realization(&spec, i)).collect::<mpemba_core::Result<Vec<_>>>()?;
        for &mode in modes(cfg.mode) {
            for tr in reduce_realizations(&spec, &samples, mode) {
                out.tables.push(Table::from_trace("exact", &tr).meta("realizations", cfg.realizations));
            }
        }
        for (pa, pq) in purity_statistics(&spec, &samples) {
            out.tables.push(Table::from_trace("exact", &pa).meta("realizations", cfg.realizations));
            out.tables.push(Table::from_trace("exact", &pq).meta("realizations", cfg.realizations));
        }
        out.summary.push(format!("exact: N_A={n_a}, {} realizations, {} angles", cfg.realizations, cfg.thetas.len()));
    }
    Ok(out)
}

fn bond_meta(t: Table, log: &[LayerLog]) -> Table {
    let chi = log.iter().map(|l| l.max_chi).max().unwrap_or(1);
    let disc = log.iter().map(|l| l.discarded).fold(0.0, f64::max);
    t.meta("max_chi", chi).meta("max_discarded", num(disc))
}

fn tn(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let chain = cfg.chain()?;
    let subs: Vec<_> = cfg.n_a.iter().map(|&k| cfg.subsystem(k)).collect();
    let policy = cfg.policy();
    let runs = cfg.thetas.par_iter().map(|&th| annealed_asymmetry_tn_multi(&cfg.product(th), &chain, &subs, cfg.t_max, &policy)).collect::<mpemba_core::Result<Vec<_>>>()?;
    let mut out = RunOutput::default();
    for (th, per_sub) in cfg.thetas.iter().zip(runs) {
        for run in per_sub {
            let residue = run.imag_residue.iter().copied().fold(0.0, f64::max);
            for tr in [&run.asymmetry, &run.purity, &run.decohered] {
                out.tables.push(bond_meta(Table::from_trace("tn", tr), &run.log).meta("max_imag_residue", num(residue)));
            }
            let chi = run.log.iter().map(|l| l.max_chi).max().unwrap_or(1);
            out.summary.push(format!("tn: theta={th} N_A={} max_chi={chi}", run.asymmetry.meta.n_a));
        }
    }
    Ok(out)
}

fn splus_meta(cfg: &ExperimentConfig, theta: f64) -> TraceMeta {
    TraceMeta {
        theta,
        n_sites: cfg.n,
        n_a: 1,
        q: cfg.q,
        state: cfg.state,
        estimator: Estimator::MonteCarlo,
        observable: Observable::SplusSquared,
        renyi: 2.0,
    }
}

/// `|<S+>|^2` per state and layer along one circuit.
fn splus_realization(cfg: &ExperimentConfig, chain: &ChainSpec, index: u64) -> mpemba_core::Result<Vec<Vec<f64>>> {
    let chain = *chain;
    let site = cfg.splus_site();
    let mut r = rng::stream(chain.seed, rng::DOMAIN_CIRCUIT, index);
    let mut states = cfg.thetas.iter().map(|&t| tilted_product_state(&cfg.product(t), &chain)).collect::<mpemba_core::Result<Vec<_>>>()?;
    let mut rows = vec![Vec::with_capacity(cfg.t_max + 1); states.len()];
    for (st, row) in states.iter().zip(rows.iter_mut()) {
        row.push(splus_expectation(st, site)?.norm_sqr());
    }
    for _ in 0..cfg.t_max {
        let layer = sample_layer(&chain, &mut r);
        for (st, row) in states.iter_mut().zip(rows.iter_mut()) {
            st.apply_layer(&layer);
            row.push(splus_expectation(st, site)?.norm_sqr());
        }
    }
    Ok(rows)
}

pub fn splus_traces(cfg: &ExperimentConfig) -> Result<Vec<(AsymmetryTrace, Vec<LayerLog>)>> {
    match cfg.estimator {
        SplusEstimator::Tn => {
            let chain = cfg.chain()?;
            let policy = cfg.policy();
            Ok(cfg.thetas.par_iter().map(|&th| splus_trace_tn(&cfg.product(th), &chain, cfg.splus_site(), cfg.t_max, &policy)).collect::<mpemba_core::Result<Vec<_>>>()?)
        }
        SplusEstimator::Exact => {
            let chain = cfg.chain()?;
            let samples = (0..cfg.realizations as u64).into_par_iter().map(|i| splus_realization(cfg, &chain, i)).collect::<mpemba_core::Result<Vec<_>>>()?;
            let mut out = Vec::new();
            for (k, &th) in cfg.thetas.iter().enumerate() {
                let mut tr = AsymmetryTrace::new(splus_meta(cfg, th));
                for t in 0..=cfg.t_max {
                    let col: Vec<f64> = samples.iter().map(|s| s[k][t]).collect();
                    let (m, e) = mean_se(&col);
                    tr.push(t, m, e);
                }
                out.push((tr, Vec::new()));
            }
            Ok(out)
        }
    }
}

fn opspread(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let traces = splus_traces(cfg)?;
    let mut out = RunOutput::default();
    let mut fits = Table::new(
        "opspread_fit.csv",
        &["theta", "best", "diffusive_amplitude", "diffusive_rate", "diffusive_r2", "ballistic_amplitude", "ballistic_rate", "ballistic_r2", "alpha_sqrt_d"],
    )
    .meta("site", cfg.splus_site())
    .meta("transient", cfg.transient);
    for (tr, log) in &traces {
        let th = tr.meta.theta;
        let mut t = Table::from_trace("opspread", tr).meta("site", cfg.splus_site());
        if !log.is_empty() {
            t = bond_meta(t, log);
        }
        out.tables.push(t);
        match predict_splus_decay(tr, s2_density(cfg.product(th).q0())?, cfg.transient) {
            Ok(f) => {
                fits.push(vec![
                    th.to_string(),
                    f.best.model.as_str().to_string(),
                    num(f.diffusive.amplitude),
                    num(f.diffusive.rate),
                    num(f.diffusive.r2),
                    num(f.ballistic.amplitude),
                    num(f.ballistic.rate),
                    num(f.ballistic.r2),
                    num(f.alpha_sqrt_d),
                ]);
                out.summary.push(format!("opspread: theta={th} best={} R2 diffusive={:.5} ballistic={:.5}", f.best.model.as_str(), f.diffusive.r2, f.ballistic.r2));
            }
            Err(e) => out.summary.push(format!("opspread: theta={th} no fit ({e})")),
        }
    }
    out.tables.push(fits);
    Ok(out)
}

fn checkpoints(t_max: usize, stride: usize) -> Vec<usize> {
    if stride == 0 {
        return vec![t_max];
    }
    let mut c: Vec<usize> = (1..=t_max / stride).map(|k| k * stride).collect();
    if c.last() != Some(&t_max) {
        c.push(t_max);
    }
    c
}

fn ssep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let samplers = KernelSamplers::new(&build_kernels()?);
    let init = purity_initial(cfg.n)?;
    let marks = checkpoints(cfg.t_max, cfg.stride);
    let summaries: Vec<_> = (0..cfg.trajectories as u64).into_par_iter().map(|i| run_checkpoints(&init, &samplers, &marks, cfg.seed, i)).collect();
    let mut out = RunOutput::default();
    for &th in &cfg.thetas {
        let meta = TraceMeta {
            theta: th,
            n_sites: cfg.n,
            n_a: init.interface + 1,
            q: 0,
            state: cfg.state,
            estimator: Estimator::MonteCarlo,
            observable: Observable::PurityA,
            renyi: 2.0,
        };
        let mut tr = AsymmetryTrace::new(meta);
        let mut hits = 0;
        for (k, &t) in marks.iter().enumerate() {
            let at: Vec<_> = summaries.iter().map(|s| s[k]).collect();
            let est = reduce_purity_rate(th, t, &at, cfg.seed)?;
            hits = est.wall_hits;
            tr.push(t, est.value, est.std_error);
        }
        let predicted = 4.0 * mft_mu(th.cos().ln(), 0.5, 0.0, 3)?.value;
        let mut table = Table::from_trace("ssep", &tr);
        table.name = format!("ssep_purity_rate_theta{th}.csv");
        for (k, v) in table.meta.iter_mut() {
            if k == "observable" {
                *v = "purity_rate".into();
            } else if k == "q" {
                *v = "inf".into();
            }
        }
        let table = table.meta("trajectories", cfg.trajectories).meta("wall_hits", hits).meta("mft_rate", num(predicted)).meta("series_remainder", num(purity_rate_remainder(th)));
        out.summary.push(format!("ssep: theta={th} rate={:.6} +- {:.6} (series {:.6})", tr.values[tr.len() - 1], tr.errors[tr.len() - 1], predicted));
        out.tables.push(table);
    }
    if cfg.profile_width > 0 {
        let finals: Vec<_> = (0..cfg.trajectories as u64).into_par_iter().map(|i| run_trajectory(&init, &samplers, cfg.t_max, cfg.seed, i)).collect();
        let p = density_profile(&finals, cfg.profile_width)?;
        let mut t = Table::new("ssep_profile.csv", &["offset", "value", "error"]).meta("observable", "red_density").meta("t", cfg.t_max).meta("trajectories", cfg.trajectories);
        for k in 0..p.offsets.len() {
            t.push(vec![p.offsets[k].to_string(), num(p.density[k]), num(p.error[k])]);
        }
        out.tables.push(t);
    }
    Ok(out)
}

fn prediction_meta(cfg: &ExperimentConfig, theta: f64, n_a: usize) -> TraceMeta {
    TraceMeta {
        theta,
        n_sites: 0,
        n_a,
        q: 1,
        state: cfg.state,
        estimator: Estimator::Prediction,
        observable: Observable::Asymmetry,
        renyi: 2.0,
    }
}

fn mft(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let mut series = Table::new("mft_series.csv", &["theta", "n_a", "g", "g_over_sin3", "saddle", "rate_series", "rate_mu", "rate_remainder", "s2"]).meta("order", cfg.order);
    for &th in &cfg.thetas {
        let g = mft_g(th, cfg.order)?.value;
        let rate = purity_rate_series(th, cfg.order)?.value;
        let rate_mu = 4.0 * mft_mu(th.cos().ln(), 0.5, 0.0, 3)?.value;
        let s2 = s2_density(cfg.product(th).q0())?;
        for &n_a in &cfg.n_a {
            series.push(vec![th.to_string(), n_a.to_string(), num(g), num(g / th.sin().powi(3)), num(saddle_initial_asymmetry(n_a, th)), num(rate), num(rate_mu), num(purity_rate_remainder(th)), num(s2)]);
            let mut st = AsymmetryTrace::new(prediction_meta(cfg, th, n_a));
            let mut regime_end = cfg.t_max;
            for t in 0..=cfg.t_max {
                let p = short_time_asymmetry(t as f64, n_a, th)?;
                if !p.in_regime && regime_end == cfg.t_max {
                    regime_end = t;
                }
                st.push(t, p.value, 0.0);
            }
            let mut table = Table::from_trace("mft", &st).meta("model", "short_time").meta("regime_end", regime_end);
            table.name = format!("mft_short_time_theta{th}_na{n_a}.csv");
            out.tables.push(table);
            if let (Some(alpha), Some(d)) = (cfg.alpha, cfg.diffusion) {
                let mut env = AsymmetryTrace::new(prediction_meta(cfg, th, n_a));
                for t in 0..=cfg.t_max {
                    env.push(t, predict_asymmetry_envelope(n_a, &cfg.product(th), t as f64, alpha, d)?, 0.0);
                }
                let mut table = Table::from_trace("mft", &env).meta("model", "envelope").meta("alpha", alpha).meta("diffusion", d);
                table.name = format!("mft_envelope_theta{th}_na{n_a}.csv");
                out.tables.push(table);
            }
        }
        out.summary.push(format!("mft: theta={th} g={g:.6} rate={rate:.6}"));
    }
    out.tables.push(series);
    if let (Some(alpha), Some(d)) = (cfg.alpha, cfg.diffusion) {
        let mut cross = Table::new("mft_envelope_crossings.csv", &["theta_1", "theta_2", "n_a", "t_m"]).meta("alpha", alpha).meta("diffusion", d);
        let mut sorted = cfg.thetas.clone();
        sorted.sort_by(f64::total_cmp);
        for (i, &a) in sorted.iter().enumerate() {
            for &b in &sorted[i + 1..] {
                if a == 0.0 || a == b {
                    continue;
                }
                for &n_a in &cfg.n_a {
                    let t = envelope_crossing_time(n_a, &cfg.product(a), &cfg.product(b), alpha, d)?;
                    cross.push(vec![a.to_string(), b.to_string(), n_a.to_string(), t.map(num).unwrap_or_else(|| "none".into())]);
                }
            }
        }
        out.tables.push(cross);
    }
    Ok(out)
}
