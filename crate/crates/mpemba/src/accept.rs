//! Acceptance suite: one pass/fail verdict per criterion, tolerances pinned below.

use crate::cli;
use crate::output::{body_bytes, read_table};
use mpemba_core::asymmetry_exact::{charge_resolved_traces, product_state_decohered_purity, purity_statistics, simulate_realization, EnsembleSpec, SiteRange};
use mpemba_core::fit::quadratic_in;
use mpemba_core::mft_predictors::{mft_mu, predict_splus_decay, purity_rate_remainder, s2_density, saddle_initial_asymmetry, short_time_asymmetry, DEFAULT_TRANSIENT};
use mpemba_core::qudit_sim::{sample_sector_gate, tilted_product_state, Boundary, ChainSpec, ProductStateSpec};
use mpemba_core::replica_tn::{annealed_asymmetry_tn, annealed_asymmetry_tn_multi, mpemba_crossing_time, splus_trace_tn, TruncationPolicy};
use mpemba_core::rng;
use mpemba_core::ssep_largeq::{build_kernels, purity_trajectory, reduce_purity_rate, run_trajectory, KernelSamplers, SsepConfig};
use mpemba_core::stats::mean_se;
use mpemba_core::trace::AsymmetryTrace;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const HAAR_SAMPLES: usize = 100_000;
pub const UNITARITY_TOL: f64 = 1e-12;
/// Absolute floor for comparisons against sample means of identical values.
pub const ROUNDOFF: f64 = 1e-12;
pub const SIGMAS: f64 = 3.0;

pub const T0_SIZES: [usize; 5] = [2, 4, 8, 16, 32];
pub const T0_ANGLES: [f64; 3] = [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2];
pub const T0_TOL: f64 = 1e-8;
pub const SADDLE_REL_TOL: f64 = 0.05;
pub const SADDLE_MIN_NA: usize = 16;
/// Largest subsystem evaluated on a statevector; beyond it the charge
/// distribution of the product state is convolved site by site.
pub const T0_STATEVECTOR_MAX: usize = 16;

pub const EQUIV_N: usize = 6;
pub const EQUIV_NA: usize = 2;
pub const EQUIV_ANGLES: [f64; 2] = [0.3, 0.9];
pub const EQUIV_T: usize = 4;
pub const EQUIV_REALIZATIONS: usize = 20_000;

pub const QME_N: usize = 64;
pub const QME_NA: usize = 8;
pub const QME_PAIRS: [(f64, f64); 2] = [(0.5, 1.0), (0.6, 1.2)];
pub const QME_T: usize = 30;
pub const QME_FERRO_CUTOFF: f64 = 1e-7;
pub const QME_TAF_CUTOFF: f64 = 1e-4;
/// Saturation: the larger-angle asymmetry has fallen below this fraction of its
/// initial value.
pub const SATURATION_FRACTION: f64 = 0.05;

pub const SCALING_N: usize = 128;
pub const SCALING_SIZES: [usize; 5] = [4, 6, 8, 10, 12];
pub const SCALING_PAIR: (f64, f64) = (0.5, 1.0);
pub const SCALING_T: usize = 40;
pub const SCALING_R2: f64 = 0.9;

pub const SPREAD_N: usize = 24;
pub const SPREAD_ANGLES: [f64; 3] = [0.3, 0.6, 1.0];
pub const SPREAD_T: usize = 30;
pub const SPREAD_CUTOFF: f64 = 1e-10;
pub const SPREAD_T0_TOL: f64 = 1e-10;
pub const SPREAD_ALPHA_TOL: f64 = 0.2;
pub const SPREAD_Q2_N: usize = 10;
pub const SPREAD_Q2_THETA: f64 = 0.1;
pub const SPREAD_Q2_T: usize = 20;
pub const SPREAD_Q2_CUTOFF: f64 = 1e-12;

pub const KERNEL_TOL: f64 = 1e-12;
pub const WALK_TRAJECTORIES: usize = 10_000;
pub const WALK_T: usize = 40;

pub const MFT_ANGLES: [f64; 3] = [0.1, 0.2, 0.3];
pub const MFT_T: usize = 400;
pub const MFT_N: usize = 4000;
pub const MFT_TRAJECTORIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    HaarMoments,
    InitialOracle,
    TnExactEquivalence,
    QmeCrossing,
    MpembaTimeScaling,
    OperatorSpreading,
    SsepKernels,
    MftAgreement,
    Determinism,
}

pub const ALL: [Criterion; 9] = [
    Criterion::HaarMoments,
    Criterion::InitialOracle,
    Criterion::TnExactEquivalence,
    Criterion::QmeCrossing,
    Criterion::MpembaTimeScaling,
    Criterion::OperatorSpreading,
    Criterion::SsepKernels,
    Criterion::MftAgreement,
    Criterion::Determinism,
];

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::HaarMoments => "haar_moments",
            Criterion::InitialOracle => "t0_oracle",
            Criterion::TnExactEquivalence => "tn_exact_equivalence",
            Criterion::QmeCrossing => "qme_crossing",
            Criterion::MpembaTimeScaling => "mpemba_time_scaling",
            Criterion::OperatorSpreading => "operator_spreading",
            Criterion::SsepKernels => "ssep_kernels",
            Criterion::MftAgreement => "mft_agreement",
            Criterion::Determinism => "determinism",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ALL.iter().copied().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub criterion: Criterion,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!("{} {} ({:.1} s): {}", if self.passed { "PASS" } else { "FAIL" }, self.criterion.name(), self.seconds, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    pub jobs: Option<usize>,
    /// Scratch space for the determinism re-runs.
    pub scratch: PathBuf,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: 2024, jobs: None, scratch: std::env::temp_dir().join(format!("mpemba-accept-{}", std::process::id())) }
    }
}

/// Outcome of one criterion before timing: verdict and a one-line account.
type Check = Result<(bool, String), String>;

pub fn evaluate(c: Criterion, opts: &SuiteOptions) -> Verdict {
    let start = Instant::now();
    let r = match c {
        Criterion::HaarMoments => haar_moments(opts),
        Criterion::InitialOracle => initial_oracle(),
        Criterion::TnExactEquivalence => tn_exact_equivalence(opts),
        Criterion::QmeCrossing => qme_crossing(),
        Criterion::MpembaTimeScaling => mpemba_time_scaling(),
        Criterion::OperatorSpreading => operator_spreading(),
        Criterion::SsepKernels => ssep_kernels(opts),
        Criterion::MftAgreement => mft_agreement(opts),
        Criterion::Determinism => determinism(opts),
    };
    let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
    Verdict { criterion: c, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Runs `criteria` in order, calling `report` after each.
pub fn run_suite(criteria: &[Criterion], opts: &SuiteOptions, mut report: impl FnMut(&Verdict)) -> Vec<Verdict> {
    criteria
        .iter()
        .map(|&c| {
            let v = evaluate(c, opts);
            report(&v);
            v
        })
        .collect()
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn within_sigma(mean: f64, se: f64, expect: f64) -> bool {
    (mean - expect).abs() <= SIGMAS * se + 1e-12
}

fn haar_moments(opts: &SuiteOptions) -> Check {
    let mut ok = true;
    let mut worst_unitarity = 0.0f64;
    let mut msg = String::new();
    for q in [1usize, 2] {
        let mut r = rng::stream(opts.seed, rng::DOMAIN_GATE_TEST, q as u64);
        let dims = [q * q, 2 * q * q, q * q];
        let mut m2 = vec![Vec::with_capacity(HAAR_SAMPLES); 3];
        let mut m2_off = vec![Vec::with_capacity(HAAR_SAMPLES); 3];
        let mut m4 = vec![Vec::with_capacity(HAAR_SAMPLES); 3];
        for _ in 0..HAAR_SAMPLES {
            let g = sample_sector_gate(q, &mut r);
            for (s, u) in g.blocks.iter().enumerate() {
                let d = dims[s];
                let mut err = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let mut acc = mpemba_core::Complex64::new(0.0, 0.0);
                        for k in 0..d {
                            acc += u[(k, i)].conj() * u[(k, j)];
                        }
                        if i == j {
                            acc -= 1.0;
                        }
                        err += acc.norm_sqr();
                    }
                }
                worst_unitarity = worst_unitarity.max(err.sqrt());
                let a = u[(0, 0)].norm_sqr();
                m2[s].push(a);
                m2_off[s].push(u[(d - 1, 0)].norm_sqr());
                m4[s].push(a * a);
            }
        }
        for s in 0..3 {
            let d = dims[s] as f64;
            let (a, ae) = mean_se(&m2[s]);
            let (b, be) = mean_se(&m2_off[s]);
            let (c, ce) = mean_se(&m4[s]);
            let good = within_sigma(a, ae, 1.0 / d) && within_sigma(b, be, 1.0 / d) && within_sigma(c, ce, 2.0 / (d * (d + 1.0)));
            ok &= good;
            if !good || s == 1 {
                let _ = write!(msg, "q={q} d={d}: E|u00|^2={a:.5}+-{ae:.1e} E|u00|^4={c:.5}+-{ce:.1e} (expect {:.5}, {:.5}); ", 1.0 / d, 2.0 / (d * (d + 1.0)));
            }
        }
    }
    ok &= worst_unitarity < UNITARITY_TOL;
    let _ = write!(msg, "max |U'U-1| = {worst_unitarity:.1e}");
    Ok((ok, msg))
}

/// Sum over k of the squared binomial(N_A, cos^2(theta/2)) weights.
fn binomial_decohered_purity(n_a: usize, theta: f64) -> f64 {
    let p = (theta / 2.0).cos().powi(2);
    let mut c = 1.0f64;
    let mut acc = 0.0;
    for k in 0..=n_a {
        if k > 0 {
            c *= (n_a - k + 1) as f64 / k as f64;
        }
        acc += (c * p.powi(k as i32) * (1.0 - p).powi((n_a - k) as i32)).powi(2);
    }
    acc
}

fn initial_oracle() -> Check {
    let mut worst = 0.0f64;
    let mut worst_saddle = 0.0f64;
    for &n_a in &T0_SIZES {
        for &theta in &T0_ANGLES {
            let spec = ProductStateSpec::ferro(theta);
            let binom = binomial_decohered_purity(n_a, theta);
            let exact = if n_a <= T0_STATEVECTOR_MAX {
                let chain = ChainSpec::new(n_a, 1, Boundary::Open, 0, 0).map_err(e2s)?;
                let st = tilted_product_state(&spec, &chain).map_err(e2s)?;
                charge_resolved_traces(&st, &SiteRange::new(0, n_a), 2.0).map_err(e2s)?.1
            } else {
                product_state_decohered_purity(&spec, &SiteRange::new(0, n_a), n_a, 1)
            };
            let chain = ChainSpec::new(n_a + 2, 1, Boundary::Open, 0, 0).map_err(e2s)?;
            let tn = annealed_asymmetry_tn(&spec, &chain, &SiteRange::new(1, n_a), 0, &TruncationPolicy::default()).map_err(e2s)?.decohered.values[0];
            worst = worst.max((exact - binom).abs()).max((tn - binom).abs()).max((tn - exact).abs());
            if n_a >= SADDLE_MIN_NA {
                let exact_asym = -binom.ln();
                worst_saddle = worst_saddle.max((saddle_initial_asymmetry(n_a, theta) / exact_asym - 1.0).abs());
            }
        }
    }
    let ok = worst < T0_TOL && worst_saddle < SADDLE_REL_TOL;
    Ok((ok, format!("max pairwise |dP| = {worst:.2e} (tol {T0_TOL:e}); max saddle relative error {:.2}% for N_A >= {SADDLE_MIN_NA}", 100.0 * worst_saddle)))
}

fn tn_exact_equivalence(opts: &SuiteOptions) -> Check {
    let mut ok = true;
    let mut worst_z = 0.0f64;
    let mut msg = String::new();
    for q in [1usize, 2] {
        let chain = ChainSpec::new(EQUIV_N, q, Boundary::Open, EQUIV_T, opts.seed).map_err(e2s)?;
        let a = SiteRange::centered(EQUIV_N, EQUIV_NA);
        let spec = EnsembleSpec { chain, states: EQUIV_ANGLES.iter().map(|&t| ProductStateSpec::ferro(t)).collect(), a, t_max: EQUIV_T, renyi: 2.0 };
        spec.check().map_err(e2s)?;
        let samples = (0..EQUIV_REALIZATIONS as u64).into_par_iter().map(|i| simulate_realization(&spec, i)).collect::<Result<Vec<_>, _>>().map_err(e2s)?;
        let mc = purity_statistics(&spec, &samples);
        for (k, &theta) in EQUIV_ANGLES.iter().enumerate() {
            let run = annealed_asymmetry_tn(&spec.states[k], &chain, &a, EQUIV_T, &TruncationPolicy::default()).map_err(e2s)?;
            for (tn, m) in [(&run.purity, &mc[k].0), (&run.decohered, &mc[k].1)] {
                for t in 0..=EQUIV_T {
                    let (v, mean, se) = (tn.values[t], m.values[t], m.errors[t]);
                    let diff = (v - mean).abs();
                    let good = diff <= SIGMAS * se + ROUNDOFF;
                    if se > ROUNDOFF {
                        worst_z = worst_z.max(diff / se);
                    }
                    if !good {
                        ok = false;
                        let _ = write!(msg, "q={q} theta={theta} t={t} {}: TN {v:.6} vs MC {mean:.6}+-{se:.1e}; ", m.meta.observable.as_str());
                    }
                }
            }
        }
    }
    let _ = write!(msg, "{EQUIV_REALIZATIONS} realizations, worst |TN-MC|/se = {worst_z:.2}");
    Ok((ok, msg))
}

fn crossing_after(low: &AsymmetryTrace, high: &AsymmetryTrace) -> Result<Option<(f64, bool)>, String> {
    let Some(t) = mpemba_crossing_time(low, high).map_err(e2s)? else { return Ok(None) };
    let stays = low.times.iter().zip(low.values.iter().zip(&high.values)).filter(|(&s, _)| s as f64 > t).all(|(_, (l, h))| h < l);
    Ok(Some((t, stays)))
}

fn saturation_layer(high: &AsymmetryTrace) -> usize {
    let v0 = high.values[0];
    high.times.iter().zip(&high.values).find(|(_, &v)| v < SATURATION_FRACTION * v0).map(|(&t, _)| t).unwrap_or(*high.times.last().unwrap_or(&0))
}

fn qme_crossing() -> Check {
    let chain = ChainSpec::new(QME_N, 1, Boundary::Open, QME_T, 0).map_err(e2s)?;
    let a = [SiteRange::centered(QME_N, QME_NA)];
    let run = |spec: ProductStateSpec, cutoff: f64| annealed_asymmetry_tn_multi(&spec, &chain, &a, QME_T, &TruncationPolicy::with_cutoff(cutoff)).map(|mut r| r.remove(0).asymmetry).map_err(e2s);
    let mut ok = true;
    let mut msg = String::new();
    for (lo, hi) in QME_PAIRS {
        let (l, h) = (run(ProductStateSpec::ferro(lo), QME_FERRO_CUTOFF)?, run(ProductStateSpec::ferro(hi), QME_FERRO_CUTOFF)?);
        match crossing_after(&l, &h)? {
            Some((t, stays)) => {
                ok &= stays;
                let _ = write!(msg, "TF ({lo},{hi}) t_M={t:.2}{}; ", if stays { "" } else { " but curves re-cross" });
            }
            None => {
                ok = false;
                let _ = write!(msg, "TF ({lo},{hi}) no crossing; ");
            }
        }
        let (l, h) = (run(ProductStateSpec::antiferro(lo), QME_TAF_CUTOFF)?, run(ProductStateSpec::antiferro(hi), QME_TAF_CUTOFF)?);
        let sat = saturation_layer(&h);
        let crossed = (0..=sat).find(|&t| h.values[t] < l.values[t]);
        match crossed {
            Some(t) => {
                ok = false;
                let _ = write!(msg, "TAF ({lo},{hi}) crosses at layer {t} before saturation {sat}; ");
            }
            None => {
                let _ = write!(msg, "TAF ({lo},{hi}) no crossing up to layer {sat}; ");
            }
        }
    }
    Ok((ok, msg.trim_end_matches("; ").to_string()))
}

fn mpemba_time_scaling() -> Check {
    let chain = ChainSpec::new(SCALING_N, 1, Boundary::Open, SCALING_T, 0).map_err(e2s)?;
    let subs: Vec<_> = SCALING_SIZES.iter().map(|&k| SiteRange::centered(SCALING_N, k)).collect();
    let policy = TruncationPolicy::with_cutoff(QME_FERRO_CUTOFF);
    let (lo, hi) = SCALING_PAIR;
    let runs = [lo, hi].par_iter().map(|&th| annealed_asymmetry_tn_multi(&ProductStateSpec::ferro(th), &chain, &subs, SCALING_T, &policy)).collect::<Result<Vec<_>, _>>().map_err(e2s)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut msg = String::new();
    for (k, &n_a) in SCALING_SIZES.iter().enumerate() {
        match mpemba_crossing_time(&runs[0][k].asymmetry, &runs[1][k].asymmetry).map_err(e2s)? {
            Some(t) => {
                x.push(n_a as f64);
                y.push(t);
                let _ = write!(msg, "N_A={n_a}: {t:.2}; ");
            }
            None => {
                let _ = write!(msg, "N_A={n_a}: none; ");
            }
        }
    }
    if x.len() != SCALING_SIZES.len() {
        return Ok((false, format!("{msg}not every size crossed within {SCALING_T} layers")));
    }
    let f = quadratic_in(&x, &y).map_err(e2s)?;
    let _ = write!(msg, "t_M = {:.3} + {:.4} N_A^2, R^2 = {:.4}", f.intercept, f.slope, f.r2);
    Ok((f.r2 > SCALING_R2, msg))
}

fn operator_spreading() -> Check {
    let chain = ChainSpec::new(SPREAD_N, 1, Boundary::Open, SPREAD_T, 0).map_err(e2s)?;
    let policy = TruncationPolicy::with_cutoff(SPREAD_CUTOFF);
    let traces = SPREAD_ANGLES
        .par_iter()
        .map(|&th| splus_trace_tn(&ProductStateSpec::ferro(th), &chain, SPREAD_N / 2, SPREAD_T, &policy).map(|r| r.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(e2s)?;
    let mut ok = true;
    let mut msg = String::new();
    let mut t0_err = 0.0f64;
    let mut a = Vec::new();
    let mut s2 = Vec::new();
    for (tr, &th) in traces.iter().zip(&SPREAD_ANGLES) {
        t0_err = t0_err.max((tr.values[0] - th.sin().powi(2) / 2.0).abs());
        let s = s2_density(ProductStateSpec::ferro(th).q0()).map_err(e2s)?;
        let f = predict_splus_decay(tr, s, DEFAULT_TRANSIENT).map_err(e2s)?;
        a.push(f.alpha_sqrt_d);
        s2.push(s);
    }
    ok &= t0_err < SPREAD_T0_TOL;
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    let spread = a.iter().map(|v| (v / mean - 1.0).abs()).fold(0.0, f64::max);
    ok &= spread <= SPREAD_ALPHA_TOL;
    let _ = write!(msg, "t=0 error {t0_err:.1e}; alpha*sqrt(D) = {} (max deviation {:.1}%); ", a.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", "), 100.0 * spread);
    let mut observed = Vec::new();
    let mut predicted = Vec::new();
    for i in 0..traces.len() {
        for j in i + 1..traces.len() {
            let (ti, tj) = (SPREAD_ANGLES[i], SPREAD_ANGLES[j]);
            let tp = (2.0 * (tj / ti).ln() / (mean * (s2[j] - s2[i]))).powi(2);
            let to = mpemba_crossing_time(&traces[i], &traces[j]).map_err(e2s)?;
            let _ = write!(msg, "({ti},{tj}) crossing {} vs envelope {tp:.1}; ", to.map(|t| format!("{t:.1}")).unwrap_or_else(|| "none".into()));
            match to {
                Some(t) => observed.push(t),
                None => ok = false,
            }
            predicted.push(tp);
        }
    }
    if observed.len() == predicted.len() {
        let rank = |v: &[f64]| {
            let mut ix: Vec<usize> = (0..v.len()).collect();
            ix.sort_by(|&x, &y| v[x].total_cmp(&v[y]));
            ix
        };
        let same = rank(&observed) == rank(&predicted);
        ok &= same;
        if !same {
            msg.push_str("crossing order differs from the envelope prediction; ");
        }
    }
    let chain2 = ChainSpec::new(SPREAD_Q2_N, 2, Boundary::Open, SPREAD_Q2_T, 0).map_err(e2s)?;
    let spec2 = ProductStateSpec::ferro(SPREAD_Q2_THETA);
    let (tr2, _) = splus_trace_tn(&spec2, &chain2, SPREAD_Q2_N / 2, SPREAD_Q2_T, &TruncationPolicy::with_cutoff(SPREAD_Q2_CUTOFF)).map_err(e2s)?;
    let f2 = predict_splus_decay(&tr2, s2_density(spec2.q0()).map_err(e2s)?, DEFAULT_TRANSIENT).map_err(e2s)?;
    let ballistic = f2.ballistic.r2 > f2.diffusive.r2;
    ok &= ballistic;
    let _ = write!(msg, "q=2 theta={SPREAD_Q2_THETA}: R^2 exp(-gamma t) {:.5} vs exp(-a sqrt t) {:.5}", f2.ballistic.r2, f2.diffusive.r2);
    Ok((ok, msg))
}

fn bits(c: usize) -> [usize; 4] {
    [(c >> 3) & 1, (c >> 2) & 1, (c >> 1) & 1, c & 1]
}

/// One color on one bond: a lone particle hops with probability 1/2.
fn hop(from: (usize, usize), to: (usize, usize)) -> f64 {
    match from {
        (1, 0) | (0, 1) => {
            if to.0 + to.1 == 1 {
                0.5
            } else {
                0.0
            }
        }
        _ => f64::from(u8::from(from == to)),
    }
}

fn ssep_kernels(opts: &SuiteOptions) -> Check {
    let k = build_kernels().map_err(e2s)?;
    let mut stoch = 0.0f64;
    let mut negative = false;
    for m in [&k.m, &k.l, &k.r] {
        for col in 0..16 {
            stoch = stoch.max(((0..16).map(|row| m[row][col]).sum::<f64>() - 1.0).abs());
            negative |= (0..16).any(|row| m[row][col] < 0.0);
        }
    }
    let mut m_err = 0.0f64;
    for from in 0..16 {
        for to in 0..16 {
            let [r0, b0, r1, b1] = bits(from);
            let [s0, c0, s1, c1] = bits(to);
            m_err = m_err.max((k.m[to][from] - hop((r0, r1), (s0, s1)) * hop((b0, b1), (c0, c1))).abs());
        }
    }
    let mut odd_total = 0;
    for m in [&k.l, &k.r] {
        for from in 0..16 {
            for to in 0..16 {
                if m[to][from] == 0.0 {
                    continue;
                }
                let (f, t) = (bits(from), bits(to));
                let dr = (t[0] + t[2]) as i64 - (f[0] + f[2]) as i64;
                let db = (t[1] + t[3]) as i64 - (f[1] + f[3]) as i64;
                if (dr + db) % 2 != 0 || (dr - db) % 2 != 0 {
                    odd_total += 1;
                }
            }
        }
    }
    let s = KernelSamplers::new(&k);
    let (n, start) = (10 * WALK_T, 5 * WALK_T - 1);
    let init = SsepConfig::empty(n, start).map_err(e2s)?;
    let disp: Vec<f64> = (0..WALK_TRAJECTORIES as u64).into_par_iter().map(|i| run_trajectory(&init, &s, WALK_T, opts.seed, i).interface as f64 - start as f64).collect();
    let (mean, se) = mean_se(&disp);
    let sq: Vec<f64> = disp.iter().map(|d| d * d).collect();
    let (var, var_se) = mean_se(&sq);
    let expect = 2.0 * WALK_T as f64;
    let walk = within_sigma(mean, se, 0.0) && within_sigma(var, var_se, expect);
    let ok = stoch < KERNEL_TOL && !negative && m_err < 1e-14 && odd_total == 0 && walk;
    Ok((
        ok,
        format!(
            "column sums within {stoch:.1e}; M vs independent hops {m_err:.1e}; {odd_total} L/R transitions with odd total or unpaired colors; interface mean {mean:.3}+-{se:.3}, variance {var:.2}+-{var_se:.2} (expect {expect})"
        ),
    ))
}

fn mft_agreement(opts: &SuiteOptions) -> Check {
    let s = KernelSamplers::new(&build_kernels().map_err(e2s)?);
    let sums = (0..MFT_TRAJECTORIES as u64).into_par_iter().map(|i| purity_trajectory(MFT_N, MFT_T, opts.seed, i, &s)).collect::<Result<Vec<_>, _>>().map_err(e2s)?;
    let mut ok = true;
    let mut msg = String::new();
    for &th in &MFT_ANGLES {
        let est = reduce_purity_rate(th, MFT_T, &sums, opts.seed).map_err(e2s)?;
        let pred = 4.0 * mft_mu(th.cos().ln(), 0.5, 0.0, 3).map_err(e2s)?.value;
        let tol = SIGMAS * est.std_error + purity_rate_remainder(th);
        let good = (est.value - pred).abs() <= tol && est.wall_hits == 0;
        ok &= good;
        let _ = write!(msg, "theta={th}: MC {:.5}+-{:.5} vs 4mu {pred:.5} (tol {tol:.5}, ratio {:.3}); ", est.value, est.std_error, est.value / pred);
    }
    let grid: Vec<f64> = (1..=12).map(|k| 0.05 * k as f64).chain(MFT_ANGLES).collect();
    let mut sorted = grid.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let dec = sorted.iter().map(|&th| short_time_asymmetry(9.0, 64, th).map(|p| p.decrement)).collect::<Result<Vec<_>, _>>().map_err(e2s)?;
    let monotone = dec.windows(2).all(|w| w[1] < w[0]);
    ok &= monotone;
    let _ = write!(msg, "short-time decrement {} in theta on (0, 0.6]", if monotone { "decreasing" } else { "not monotone" });
    Ok((ok, msg))
}

/// Small configs, one per engine; written twice and compared byte for byte.
pub const DETERMINISM_RUNS: &[(&str, &[&str])] = &[
    ("exact", &["n=6", "n_a=2", "t_max=3", "realizations=64", "theta=0.4,0.9"]),
    ("tn", &["n=10", "n_a=2,4", "t_max=4", "theta=0.5,1.0", "cutoff=1e-12"]),
    ("ssep", &["n=200", "t_max=40", "stride=10", "trajectories=300", "theta=0.2,0.4", "profile_width=10"]),
    ("mft", &["theta=0.2,0.5", "n_a=8,16", "t_max=6", "alpha=1.2", "diffusion=0.8"]),
    ("opspread", &["n=8", "t_max=10", "estimator=exact", "realizations=32", "theta=0.3,0.6"]),
    ("opspread", &["n=10", "t_max=10", "theta=0.3,0.6", "cutoff=1e-10"]),
];

fn run_into(engine: &str, sets: &[&str], out: &Path, seed: u64, jobs: usize) -> Result<(), String> {
    let mut args: Vec<String> = vec!["mpemba".into(), engine.into(), "--seed".into(), seed.to_string(), "--jobs".into(), jobs.to_string(), "--out".into(), out.display().to_string()];
    for s in sets {
        args.push("--set".into());
        args.push(s.to_string());
    }
    let code = cli::execute(args, &mut std::io::sink(), &mut std::io::sink());
    if code == 0 {
        Ok(())
    } else {
        Err(format!("`{engine}` exited with {code}"))
    }
}

fn manifest_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let (_, _, rows) = read_table(&dir.join(crate::output::MANIFEST)).map_err(e2s)?;
    Ok(rows.iter().map(|r| dir.join(&r[0])).collect())
}

fn determinism(opts: &SuiteOptions) -> Check {
    let jobs = opts.jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let mut files = 0;
    let mut differing = Vec::new();
    for (k, (engine, sets)) in DETERMINISM_RUNS.iter().enumerate() {
        let a = opts.scratch.join(format!("run{k}a"));
        let b = opts.scratch.join(format!("run{k}b"));
        run_into(engine, sets, &a, opts.seed, 1)?;
        run_into(engine, sets, &b, opts.seed, jobs.max(2))?;
        let (fa, fb) = (manifest_files(&a)?, manifest_files(&b)?);
        if fa.len() != fb.len() {
            differing.push(format!("{engine}: {} vs {} files", fa.len(), fb.len()));
            continue;
        }
        for (x, y) in fa.iter().zip(&fb) {
            files += 1;
            if body_bytes(x).map_err(e2s)? != body_bytes(y).map_err(e2s)? {
                differing.push(x.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
            }
        }
    }
    let _ = std::fs::remove_dir_all(&opts.scratch);
    if differing.is_empty() {
        Ok((true, format!("{files} trace bodies identical across re-runs with 1 and {} threads", jobs.max(2))))
    } else {
        Ok((false, format!("bodies differ: {}", differing.join(", "))))
    }
}
