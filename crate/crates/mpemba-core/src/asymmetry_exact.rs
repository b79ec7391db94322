//! Reduced density matrices, charge decoherence, Rényi entropies and the
//! entanglement asymmetry of exact trajectories, plus ensemble averages.

use crate::error::{invalid, Error, Result};
use crate::prelude::*;
use crate::qudit_sim::{sample_layer, tilted_product_state, Boundary, ChainSpec, ProductStateSpec, StateVector};
use crate::rng;
use crate::stats;
use crate::trace::{AsymmetryTrace, Estimator, Observable, TraceMeta};
use faer::{Mat, Side};

/// Contiguous block of sites, cyclic on periodic chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteRange {
    pub start: usize,
    pub len: usize,
}

impl SiteRange {
    pub fn new(start: usize, len: usize) -> Self {
        SiteRange { start, len }
    }

    /// `len` sites centred in a chain of `n` (left-biased when odd).
    pub fn centered(n: usize, len: usize) -> Self {
        SiteRange { start: n.saturating_sub(len) / 2, len }
    }

    pub fn sites(&self, n: usize) -> Vec<usize> {
        (0..self.len).map(|k| (self.start + k) % n).collect()
    }

    pub fn contains(&self, site: usize, n: usize) -> bool {
        (site + n - self.start % n) % n < self.len
    }

    pub fn check(&self, chain: &ChainSpec) -> Result<()> {
        let n = chain.n;
        if self.len == 0 || self.len > n {
            return Err(invalid("A", format!("length {} not in 1..={n}", self.len)));
        }
        match chain.boundary {
            Boundary::Open if self.start + self.len > n => {
                Err(invalid("A", format!("sites {}..{} exceed N={n}", self.start, self.start + self.len)))
            }
            Boundary::Periodic if self.start >= n => Err(invalid("A", format!("start {} >= N={n}", self.start))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedDensityMatrix {
    pub matrix: Mat<C64>,
    pub n_a: usize,
    pub q: usize,
}

/// Index partition of the A basis by the number of up spins `m`
/// (charge `s = m - N_A/2`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChargeSectorDecomposition {
    pub n_a: usize,
    pub q: usize,
    pub sectors: Vec<Vec<usize>>,
}

impl ChargeSectorDecomposition {
    pub fn new(n_a: usize, q: usize) -> Self {
        let d = 2 * q;
        let dim = d.pow(n_a as u32);
        let mut sectors = vec![Vec::new(); n_a + 1];
        for idx in 0..dim {
            sectors[up_count(idx, n_a, q)].push(idx);
        }
        ChargeSectorDecomposition { n_a, q, sectors }
    }

    pub fn labels(&self) -> Vec<usize> {
        let dim: usize = self.sectors.iter().map(|s| s.len()).sum();
        let mut lab = vec![0; dim];
        for (m, s) in self.sectors.iter().enumerate() {
            for &i in s {
                lab[i] = m;
            }
        }
        lab
    }
}

fn up_count(mut idx: usize, n_a: usize, q: usize) -> usize {
    let d = 2 * q;
    let mut m = 0;
    for _ in 0..n_a {
        if idx % d < q {
            m += 1;
        }
        idx /= d;
    }
    m
}

/// Reshape `|psi>` into `X[a, b]` with `a` running over A (its first site least
/// significant) and `b` over the complement.
fn reshape(state: &StateVector, a: &SiteRange) -> Result<Mat<C64>> {
    let chain = &state.chain;
    a.check(chain)?;
    let n = chain.n;
    let d = chain.local_dim();
    let mut pos_a = vec![usize::MAX; n];
    let mut pos_b = vec![usize::MAX; n];
    for (k, s) in a.sites(n).into_iter().enumerate() {
        pos_a[s] = k;
    }
    let mut kb = 0;
    for (s, slot) in pos_b.iter_mut().enumerate() {
        if pos_a[s] == usize::MAX {
            *slot = kb;
            kb += 1;
        }
    }
    let mul_a: Vec<usize> = (0..n).map(|s| if pos_a[s] != usize::MAX { d.pow(pos_a[s] as u32) } else { 0 }).collect();
    let mul_b: Vec<usize> = (0..n).map(|s| if pos_b[s] != usize::MAX { d.pow(pos_b[s] as u32) } else { 0 }).collect();
    let da = d.pow(a.len as u32);
    let db = state.dim() / da;
    let mut x = Mat::<C64>::zeros(da, db);
    for (idx, amp) in state.amps.iter().enumerate() {
        let (mut r, mut ia, mut ib) = (idx, 0, 0);
        for s in 0..n {
            let l = r % d;
            r /= d;
            ia += l * mul_a[s];
            ib += l * mul_b[s];
        }
        x[(ia, ib)] = *amp;
    }
    Ok(x)
}

pub fn reduced_density_matrix(state: &StateVector, a: &SiteRange) -> Result<ReducedDensityMatrix> {
    let x = reshape(state, a)?;
    let matrix = &x * x.adjoint();
    Ok(ReducedDensityMatrix { matrix, n_a: a.len, q: state.chain.q })
}

impl ReducedDensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    pub fn purity(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                s += self.matrix[(i, j)].norm_sqr();
            }
        }
        s
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut e: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                e = e.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        e
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.matrix.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Linalg("hermitian eigensolver"))
    }

    /// Largest `|[rho, Q_A]|` entry.
    pub fn commutator_with_charge(&self) -> f64 {
        let lab = ChargeSectorDecomposition::new(self.n_a, self.q).labels();
        let n = self.dim();
        let mut e: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let dq = lab[i] as f64 - lab[j] as f64;
                e = e.max((self.matrix[(i, j)] * dq).norm());
            }
        }
        e
    }
}

/// `rho_{A,Q} = sum_s Pi_s rho_A Pi_s`.
pub fn charge_decohere(rho: &ReducedDensityMatrix) -> ReducedDensityMatrix {
    let lab = ChargeSectorDecomposition::new(rho.n_a, rho.q).labels();
    let n = rho.dim();
    let matrix = Mat::from_fn(n, n, |i, j| if lab[i] == lab[j] { rho.matrix[(i, j)] } else { C64::new(0.0, 0.0) });
    ReducedDensityMatrix { matrix, n_a: rho.n_a, q: rho.q }
}

/// `tr rho^n` from a spectrum, clipping to `[0, 1]` with a `1e-14` floor.
pub fn trace_power(eigs: &[f64], n: f64) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigs {
        if l < -1e-8 {
            return Err(Error::NegativeEigenvalue(l));
        }
        let l = if l < 1e-14 { 0.0 } else { l.min(1.0) };
        if l > 0.0 {
            s += l.powf(n);
        }
    }
    Ok(s)
}

fn check_renyi(n: f64) -> Result<()> {
    if !(n > 0.0) || (n - 1.0).abs() < 1e-12 {
        return Err(invalid("n", format!("Rényi index must be positive and != 1, got {n}")));
    }
    Ok(())
}

pub fn renyi_entropy(rho: &ReducedDensityMatrix, n: f64) -> Result<f64> {
    check_renyi(n)?;
    Ok(trace_power(&rho.eigenvalues()?, n)?.ln() / (1.0 - n))
}

/// Spectrum of `rho_{A,Q}` assembled block by block.
fn decohered_spectrum(rho: &ReducedDensityMatrix) -> Result<Vec<f64>> {
    let dec = ChargeSectorDecomposition::new(rho.n_a, rho.q);
    let mut eigs = Vec::with_capacity(rho.dim());
    for sec in &dec.sectors {
        let m = sec.len();
        let block = Mat::from_fn(m, m, |i, j| rho.matrix[(sec[i], sec[j])]);
        eigs.extend(block.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Linalg("hermitian eigensolver"))?);
    }
    Ok(eigs)
}

/// `S_n(rho_{A,Q}) - S_n(rho_A)`.
pub fn entanglement_asymmetry(rho: &ReducedDensityMatrix, n: f64) -> Result<f64> {
    check_renyi(n)?;
    let sq = trace_power(&decohered_spectrum(rho)?, n)?.ln() / (1.0 - n);
    Ok(sq - renyi_entropy(rho, n)?)
}

fn gram_trace_power(x: &Mat<C64>, n: f64) -> Result<f64> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Ok(0.0);
    }
    let g = if x.nrows() <= x.ncols() { x * x.adjoint() } else { x.adjoint() * x };
    if (n - 2.0).abs() < 1e-15 {
        let k = g.nrows();
        let mut s = 0.0;
        for j in 0..k {
            for i in 0..k {
                s += g[(i, j)].norm_sqr();
            }
        }
        return Ok(s);
    }
    let eigs = g.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Linalg("hermitian eigensolver"))?;
    trace_power(&eigs, n)
}

/// `(tr rho_A^n, tr rho_{A,Q}^n)` from the Gram matrices of `X` and of its
/// sector row blocks, whichever side is smaller.
pub fn charge_resolved_traces(state: &StateVector, a: &SiteRange, n: f64) -> Result<(f64, f64)> {
    check_renyi(n)?;
    let x = reshape(state, a)?;
    let full = gram_trace_power(&x, n)?;
    let dec = ChargeSectorDecomposition::new(a.len, state.chain.q);
    let mut dq = 0.0;
    for sec in &dec.sectors {
        let xs = Mat::from_fn(sec.len(), x.ncols(), |i, j| x[(sec[i], j)]);
        dq += gram_trace_power(&xs, n)?;
    }
    Ok((full, dq))
}

/// Decohered purity of a product state on `a`: the squared weights of its
/// charge distribution, a site-by-site convolution.
pub fn product_state_decohered_purity(spec: &ProductStateSpec, a: &SiteRange, n: usize, q: usize) -> f64 {
    let mut dist = vec![1.0];
    for s in a.sites(n) {
        let up: f64 = spec.local_vector(s, q).iter().take(q).map(|v| v.norm_sqr()).sum();
        let mut next = vec![0.0; dist.len() + 1];
        for (k, p) in dist.iter().enumerate() {
            next[k] += p * (1.0 - up);
            next[k + 1] += p * up;
        }
        dist = next;
    }
    dist.iter().map(|p| p * p).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageMode {
    Quenched,
    Annealed,
}

/// Several initial states driven by one stream of circuits.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub chain: ChainSpec,
    pub states: Vec<ProductStateSpec>,
    pub a: SiteRange,
    pub t_max: usize,
    pub renyi: f64,
}

impl EnsembleSpec {
    pub fn check(&self) -> Result<()> {
        self.a.check(&self.chain)?;
        check_renyi(self.renyi)?;
        for s in &self.states {
            s.check_chain(&self.chain)?;
        }
        if self.states.is_empty() {
            return Err(invalid("theta", "no initial states"));
        }
        Ok(())
    }
}

/// `traces[state][t] = (tr rho_A^n, tr rho_{A,Q}^n)` for one circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSample {
    pub traces: Vec<Vec<(f64, f64)>>,
}

pub fn simulate_realization(spec: &EnsembleSpec, index: u64) -> Result<RealizationSample> {
    let chain = spec.chain;
    let mut r = rng::stream(chain.seed, rng::DOMAIN_CIRCUIT, index);
    let mut states = spec.states.iter().map(|s| tilted_product_state(s, &chain)).collect::<Result<Vec<_>>>()?;
    let mut traces = vec![Vec::with_capacity(spec.t_max + 1); states.len()];
    for (st, tr) in states.iter().zip(traces.iter_mut()) {
        tr.push(charge_resolved_traces(st, &spec.a, spec.renyi)?);
    }
    for _ in 0..spec.t_max {
        let layer = sample_layer(&chain, &mut r);
        for (st, tr) in states.iter_mut().zip(traces.iter_mut()) {
            st.apply_layer(&layer);
            tr.push(charge_resolved_traces(st, &spec.a, spec.renyi)?);
        }
    }
    Ok(RealizationSample { traces })
}

fn meta_for(spec: &EnsembleSpec, k: usize, estimator: Estimator, observable: Observable) -> TraceMeta {
    TraceMeta {
        theta: spec.states[k].theta,
        n_sites: spec.chain.n,
        n_a: spec.a.len,
        q: spec.chain.q,
        state: spec.states[k].kind,
        estimator,
        observable,
        renyi: spec.renyi,
    }
}

/// Quenched: mean of per-circuit asymmetries. Annealed:
/// `ln(E tr rho_Q^n / E tr rho^n) / (1-n)`, jackknife bias-corrected.
pub fn reduce_realizations(spec: &EnsembleSpec, samples: &[RealizationSample], mode: AverageMode) -> Vec<AsymmetryTrace> {
    let n = spec.renyi;
    let estimator = match mode {
        AverageMode::Quenched => Estimator::Quenched,
        AverageMode::Annealed => Estimator::AnnealedExact,
    };
    (0..spec.states.len())
        .map(|k| {
            let mut tr = AsymmetryTrace::new(meta_for(spec, k, estimator, Observable::Asymmetry));
            for t in 0..=spec.t_max {
                let pn: Vec<f64> = samples.iter().map(|s| s.traces[k][t].0).collect();
                let pq: Vec<f64> = samples.iter().map(|s| s.traces[k][t].1).collect();
                let (v, e) = match mode {
                    AverageMode::Quenched => {
                        let ds: Vec<f64> = pn.iter().zip(&pq).map(|(a, b)| (b.ln() - a.ln()) / (1.0 - n)).collect();
                        stats::mean_se(&ds)
                    }
                    AverageMode::Annealed => stats::jackknife(&[&pn, &pq], |m| (m[1].ln() - m[0].ln()) / (1.0 - n)),
                };
                tr.push(t, v, if e.is_finite() { e } else { 0.0 });
            }
            tr
        })
        .collect()
}

/// Sample means and standard errors of `tr rho^n` and `tr rho_Q^n` per state.
pub fn purity_statistics(spec: &EnsembleSpec, samples: &[RealizationSample]) -> Vec<(AsymmetryTrace, AsymmetryTrace)> {
    (0..spec.states.len())
        .map(|k| {
            let mut pa = AsymmetryTrace::new(meta_for(spec, k, Estimator::MonteCarlo, Observable::PurityA));
            let mut pq = AsymmetryTrace::new(meta_for(spec, k, Estimator::MonteCarlo, Observable::PurityAQ));
            for t in 0..=spec.t_max {
                let a: Vec<f64> = samples.iter().map(|s| s.traces[k][t].0).collect();
                let b: Vec<f64> = samples.iter().map(|s| s.traces[k][t].1).collect();
                let (ma, ea) = stats::mean_se(&a);
                let (mb, eb) = stats::mean_se(&b);
                pa.push(t, ma, ea);
                pq.push(t, mb, eb);
            }
            (pa, pq)
        })
        .collect()
}

/// Sequential ensemble average over realizations `0..realizations`.
pub fn ensemble_average(spec: &EnsembleSpec, realizations: usize, mode: AverageMode) -> Result<Vec<AsymmetryTrace>> {
    if realizations < 2 {
        return Err(invalid("realizations", "at least 2"));
    }
    spec.check()?;
    let samples = (0..realizations as u64).map(|i| simulate_realization(spec, i)).collect::<Result<Vec<_>>>()?;
    Ok(reduce_realizations(spec, &samples, mode))
}
