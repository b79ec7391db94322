//! Haar-averaged two-replica tensor network for annealed purities.
//!
//! A replica vector lives on four copies `(ket1, bra1, ket2, bra2)` per site and
//! is expanded in the non-orthogonal [`ReplicaBasis`]. One averaged sector gate
//! is the [`TransferGate`]; boundaries are products of per-site linear forms,
//! contracted through their overlaps with the basis states.

mod basis;
mod gate;
mod mps;

pub use basis::{local_product_replica, LocalForm, ReplicaBasis, ReplicaLabel};
pub use gate::{build_transfer_gate, TransferGate};
pub use mps::{ReplicaMps, SweepStats, TruncationPolicy};

use crate::asymmetry_exact::SiteRange;
use crate::error::{invalid, Error, Result};
use crate::prelude::*;
use crate::qudit_sim::{Boundary, ChainSpec, ProductStateSpec};
use crate::trace::{AsymmetryTrace, Estimator, Observable, TraceMeta};
use core::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerLog {
    pub t: usize,
    pub max_chi: usize,
    pub discarded: f64,
}

/// Product of per-site linear forms.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBoundary {
    pub sites: Vec<LocalForm>,
}

pub fn identity_boundary(chain: &ChainSpec) -> ProductBoundary {
    ProductBoundary { sites: vec![LocalForm::Identity; chain.n] }
}

/// Swap on `a`, trace elsewhere: `tr rho_A^2`.
pub fn build_swap_boundary(a: &SiteRange, chain: &ChainSpec) -> ProductBoundary {
    build_fourier_boundary(a, 0.0, chain)
}

/// Twisted swap `tr(rho_A e^{i phi Q_A} rho_A e^{-i phi Q_A})`. In the Z-dressed
/// frame the per-site components are `i^(a-c) sin(k)^(a+c) cos(k)^(2-a-c)`
/// with `k = phi/2`, finite for every `k`.
pub fn build_fourier_boundary(a: &SiteRange, phi: f64, chain: &ChainSpec) -> ProductBoundary {
    let sites = (0..chain.n).map(|s| if a.contains(s, chain.n) { LocalForm::TwistedSwap(phi) } else { LocalForm::Identity }).collect();
    ProductBoundary { sites }
}

/// `tr(S+_i rho) tr(S-_i rho) = |<S+_i>|^2`.
pub fn build_splus_boundary(site: usize, chain: &ChainSpec) -> ProductBoundary {
    let mut b = identity_boundary(chain);
    b.sites[site] = LocalForm::Splus;
    b
}

/// Phase angles `2 pi j / (N_A + 1)`, `j = 0..=N_A`; averaging the twisted swaps
/// over them gives `tr rho_{A,Q}^2`.
pub fn moment_set(n_a: usize) -> Vec<f64> {
    (0..=n_a).map(|j| 2.0 * PI * j as f64 / (n_a + 1) as f64).collect()
}

impl ProductBoundary {
    /// Value on the unprojected `rho_0 (x) rho_0`.
    pub fn value_on_product(&self, spec: &ProductStateSpec, q: usize) -> C64 {
        let mut cache: Vec<(LocalForm, Vec<C64>)> = Vec::new();
        let mut acc = C64::new(1.0, 0.0);
        for (s, f) in self.sites.iter().enumerate() {
            let w = local_product_replica(spec, s, q);
            let dense = cached(&mut cache, *f, |f| f.dense(q));
            acc *= dense.iter().zip(&w).map(|(a, b)| a * *b).sum::<C64>();
        }
        acc
    }
}

fn cached<'a>(cache: &'a mut Vec<(LocalForm, Vec<C64>)>, f: LocalForm, make: impl Fn(LocalForm) -> Vec<C64>) -> &'a [C64] {
    let pos = match cache.iter().position(|(g, _)| *g == f) {
        Some(p) => p,
        None => {
            cache.push((f, make(f)));
            cache.len() - 1
        }
    };
    &cache[pos].1
}

/// Basis, averaged gate and the orthonormal frame the MPS is stored in.
///
/// MPS site vectors hold `G^{1/2} c` rather than the basis coefficients `c`,
/// so SVD truncation is optimal in the Hilbert-Schmidt norm of the replica
/// vector; in this frame the averaged gate is a symmetric projector.
#[derive(Debug, Clone)]
pub struct ReplicaEngine {
    pub basis: ReplicaBasis,
    pub gate: TransferGate,
    pub frame_gate: TransferGate,
    half: Vec<f64>,
    half_inv: Vec<f64>,
}

fn mat_vec<T>(m: &[f64], v: &[T]) -> Vec<T>
where
    T: Copy + core::ops::Mul<f64, Output = T> + core::iter::Sum<T>,
{
    let n = v.len();
    (0..n).map(|i| (0..n).map(|j| v[j] * m[i * n + j]).sum()).collect()
}

impl ReplicaEngine {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(invalid("q", "must be positive"));
        }
        let basis = ReplicaBasis::new(q);
        let gate = build_transfer_gate(&basis);
        let (half, half_inv) = basis.gram_sqrt();
        let de = basis.d_eff();
        let n = de * de;
        let kron = |m: &[f64], i: usize, j: usize| m[(i / de) * de + j / de] * m[(i % de) * de + j % de];
        let mut tg = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    let hk = kron(&half, i, k);
                    if hk == 0.0 {
                        continue;
                    }
                    for l in 0..n {
                        acc += hk * gate.matrix[k * n + l] * kron(&half_inv, l, j);
                    }
                }
                tg[i * n + j] = acc;
            }
        }
        let frame_gate = TransferGate { d_eff: de, matrix: tg };
        Ok(ReplicaEngine { basis, gate, frame_gate, half, half_inv })
    }

    /// Basis coefficients of a frame vector.
    pub fn to_basis(&self, v: &[f64]) -> Vec<f64> {
        mat_vec(&self.half_inv, v)
    }

    /// Frame vector of basis coefficients.
    pub fn to_frame(&self, c: &[f64]) -> Vec<f64> {
        mat_vec(&self.half, c)
    }

    pub fn q(&self) -> usize {
        self.basis.q
    }

    fn check_chain(&self, chain: &ChainSpec) -> Result<()> {
        if chain.q != self.q() {
            return Err(invalid("q", format!("chain has q={} but engine q={}", chain.q, self.q())));
        }
        if chain.boundary != Boundary::Open {
            return Err(invalid("boundary", "the replica network supports open chains only"));
        }
        Ok(())
    }

    /// Product MPS of the per-site projections of `rho_0 (x) rho_0`.
    pub fn build_initial_replica_state(&self, spec: &ProductStateSpec, chain: &ChainSpec) -> Result<ReplicaMps> {
        self.check_chain(chain)?;
        spec.check_chain(chain)?;
        let sites = (0..chain.n).map(|s| self.to_frame(&self.basis.project(&local_product_replica(spec, s, chain.q)))).collect();
        Ok(ReplicaMps::product(self.basis.d_eff(), sites))
    }

    pub fn form_overlaps(&self, b: &ProductBoundary) -> Vec<Vec<C64>> {
        let mut cache: Vec<(LocalForm, Vec<C64>)> = Vec::new();
        b.sites.iter().map(|f| cached(&mut cache, *f, |f| mat_vec(&self.half_inv, &self.basis.overlaps(&f.dense(self.q())))).to_vec()).collect()
    }

    /// One brick-wall layer: first half-layer swept rightward, second leftward.
    pub fn apply_layer(&self, chain: &ChainSpec, state: &mut ReplicaMps, policy: &TruncationPolicy, layer: usize) -> Result<LayerLog> {
        let [first, second] = chain.half_layers();
        let b1: Vec<usize> = first.iter().map(|p| p.0).collect();
        let b2: Vec<usize> = second.iter().map(|p| p.0).collect();
        let s1 = state.apply_half_layer(&self.frame_gate, &b1, true, policy, layer)?;
        let s2 = state.apply_half_layer(&self.frame_gate, &b2, false, policy, layer)?;
        Ok(LayerLog { t: layer, max_chi: s1.max_chi.max(s2.max_chi), discarded: s1.discarded.max(s2.discarded) })
    }

    /// Evolves `t_max` layers, calling `observe(t, state)` for `t = 0..=t_max`.
    pub fn evolve<F>(&self, chain: &ChainSpec, state: &mut ReplicaMps, t_max: usize, policy: &TruncationPolicy, mut observe: F) -> Result<Vec<LayerLog>>
    where
        F: FnMut(usize, &ReplicaMps) -> Result<()>,
    {
        self.check_chain(chain)?;
        if state.len() != chain.n {
            return Err(invalid("state", "MPS length differs from the chain"));
        }
        let mut log = vec![LayerLog { t: 0, max_chi: state.max_bond(), discarded: 0.0 }];
        observe(0, state)?;
        for t in 1..=t_max {
            log.push(self.apply_layer(chain, state, policy, t)?);
            observe(t, state)?;
        }
        Ok(log)
    }

    /// `<<F| T^t |initial>>`, real part.
    pub fn contract(&self, boundary: &ProductBoundary, chain: &ChainSpec, layers: usize, initial: &ReplicaMps, policy: &TruncationPolicy) -> Result<f64> {
        let mut state = initial.clone();
        for t in 1..=layers {
            self.apply_layer(chain, &mut state, policy, t)?;
        }
        Ok(state.contract_forms(&self.form_overlaps(boundary)).re)
    }
}

/// Annealed purities and asymmetry from one evolution.
#[derive(Debug, Clone)]
pub struct TnRun {
    pub asymmetry: AsymmetryTrace,
    pub purity: AsymmetryTrace,
    pub decohered: AsymmetryTrace,
    /// All-identity contraction, 1 up to truncation.
    pub norm: Vec<f64>,
    /// `|Im P_{A,Q}| / P_{A,Q}` before taking the real part.
    pub imag_residue: Vec<f64>,
    pub log: Vec<LayerLog>,
}

const IMAG_TOLERANCE: f64 = 1e-8;

pub fn annealed_asymmetry_tn(spec: &ProductStateSpec, chain: &ChainSpec, a: &SiteRange, t_max: usize, policy: &TruncationPolicy) -> Result<TnRun> {
    let mut runs = annealed_asymmetry_tn_multi(spec, chain, core::slice::from_ref(a), t_max, policy)?;
    Ok(runs.remove(0))
}

/// Several subsystems observed on one evolution.
pub fn annealed_asymmetry_tn_multi(spec: &ProductStateSpec, chain: &ChainSpec, subsystems: &[SiteRange], t_max: usize, policy: &TruncationPolicy) -> Result<Vec<TnRun>> {
    for a in subsystems {
        a.check(chain)?;
        if a.start + a.len > chain.n {
            return Err(invalid("A", "subsystem must not wrap on an open chain"));
        }
    }
    let engine = ReplicaEngine::new(chain.q)?;
    let ident = engine.form_overlaps(&identity_boundary(chain));
    struct Slot {
        run: TnRun,
        a: SiteRange,
        twisted: Vec<Vec<Vec<C64>>>,
    }
    let mut slots: Vec<Slot> = subsystems
        .iter()
        .map(|a| {
            let meta = |observable| TraceMeta {
                theta: spec.theta,
                n_sites: chain.n,
                n_a: a.len,
                q: chain.q,
                state: spec.kind,
                estimator: Estimator::AnnealedTn,
                observable,
                renyi: 2.0,
            };
            Slot {
                run: TnRun {
                    asymmetry: AsymmetryTrace::new(meta(Observable::Asymmetry)),
                    purity: AsymmetryTrace::new(meta(Observable::PurityA)),
                    decohered: AsymmetryTrace::new(meta(Observable::PurityAQ)),
                    norm: Vec::new(),
                    imag_residue: Vec::new(),
                    log: Vec::new(),
                },
                a: *a,
                twisted: moment_set(a.len).iter().map(|&p| engine.form_overlaps(&build_fourier_boundary(a, p, chain))).collect(),
            }
        })
        .collect();
    let mut state = engine.build_initial_replica_state(spec, chain)?;
    let log = engine.evolve(chain, &mut state, t_max, policy, |t, mps| {
        for slot in slots.iter_mut() {
            let (lo, hi) = (slot.a.start, slot.a.start + slot.a.len);
            let left = mps.left_env(&ident, 0..lo, mps.left_edge());
            let right = mps.right_env(&ident, hi..chain.n, mps.right_edge());
            let value = |forms: &[Vec<C64>]| {
                let (l, ll) = mps.left_env(forms, lo..hi, left.clone());
                mps::join(&l, ll, &right.0, right.1)
            };
            let norm = value(&ident).re;
            let vals: Vec<C64> = slot.twisted.iter().map(|f| value(f)).collect();
            let pa = vals[0].re;
            let paq_c = vals.iter().fold(C64::new(0.0, 0.0), |s, v| s + v) / (slot.a.len + 1) as f64;
            let paq = paq_c.re;
            let residue = if paq != 0.0 { paq_c.im.abs() / paq.abs() } else { paq_c.im.abs() };
            if residue > IMAG_TOLERANCE {
                return Err(Error::Linalg("decohered purity acquired an imaginary part"));
            }
            if !(pa > 0.0 && paq > 0.0) {
                return Err(Error::Linalg("non-positive annealed purity"));
            }
            let run = &mut slot.run;
            run.norm.push(norm);
            run.imag_residue.push(residue);
            run.purity.push(t, pa, 0.0);
            run.decohered.push(t, paq, 0.0);
            run.asymmetry.push(t, pa.ln() - paq.ln(), 0.0);
        }
        Ok(())
    })?;
    Ok(slots
        .into_iter()
        .map(|mut s| {
            s.run.log = log.clone();
            s.run
        })
        .collect())
}

/// Haar average of `|<S+_site>|^2` per layer. The `t = 0` value is taken on the
/// unprojected initial state, since for `q >= 2` the form lies outside the
/// replica span; from `t = 1` on the averaged gate removes the difference.
pub fn splus_trace_tn(spec: &ProductStateSpec, chain: &ChainSpec, site: usize, t_max: usize, policy: &TruncationPolicy) -> Result<(AsymmetryTrace, Vec<LayerLog>)> {
    if site >= chain.n {
        return Err(invalid("site", format!("{site} outside a chain of {}", chain.n)));
    }
    let engine = ReplicaEngine::new(chain.q)?;
    let boundary = build_splus_boundary(site, chain);
    let forms = engine.form_overlaps(&boundary);
    let mut trace = AsymmetryTrace::new(TraceMeta {
        theta: spec.theta,
        n_sites: chain.n,
        n_a: 1,
        q: chain.q,
        state: spec.kind,
        estimator: Estimator::AnnealedTn,
        observable: Observable::SplusSquared,
        renyi: 2.0,
    });
    let mut state = engine.build_initial_replica_state(spec, chain)?;
    let log = engine.evolve(chain, &mut state, t_max, policy, |t, mps| {
        let v = if t == 0 { boundary.value_on_product(spec, chain.q).re } else { mps.contract_forms(&forms).re };
        trace.push(t, v, 0.0);
        Ok(())
    })?;
    Ok((trace, log))
}

/// First time `trace1` climbs above `trace2`, given `v1(0) < v2(0)`; located by linear
/// interpolation of `ln v1 - ln v2` (of `v1 - v2` if a value is not positive).
pub fn mpemba_crossing_time(trace1: &AsymmetryTrace, trace2: &AsymmetryTrace) -> Result<Option<f64>> {
    if trace1.times != trace2.times {
        return Err(Error::GridMismatch);
    }
    let (v1, v2) = (&trace1.values, &trace2.values);
    if v1.is_empty() || v1[0] >= v2[0] {
        return Ok(None);
    }
    for k in 0..v1.len() - 1 {
        let d1 = v1[k + 1] - v2[k + 1];
        if d1 < 0.0 {
            continue;
        }
        let positive = v1[k] > 0.0 && v2[k] > 0.0 && v1[k + 1] > 0.0 && v2[k + 1] > 0.0;
        let (h0, h1) = if positive { (v1[k].ln() - v2[k].ln(), v1[k + 1].ln() - v2[k + 1].ln()) } else { (v1[k] - v2[k], d1) };
        let (t0, t1) = (trace1.times[k] as f64, trace1.times[k + 1] as f64);
        return Ok(Some(t0 + h0 / (h0 - h1) * (t1 - t0)));
    }
    Ok(None)
}
