//! Charge-conserving brick-wall circuits on chains of C^2 (x) C^q qudits.
//!
//! Basis convention, shared with every other engine: local index
//! `spin * q + color`, spin 0 is Z = +1, and site 0 is the least significant
//! digit of the global index.

use crate::error::{invalid, Error, Result};
use crate::fit;
use crate::prelude::*;
use crate::rng::{self, StreamRng};
use crate::stats;
use core::f64::consts::FRAC_1_SQRT_2;
use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Default exact-engine cap on log2 of the Hilbert-space dimension.
pub const DEFAULT_MEMORY_CAP_LOG2: f64 = 28.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSpec {
    pub n: usize,
    pub q: usize,
    pub boundary: Boundary,
    pub depth: usize,
    pub seed: u64,
}

impl ChainSpec {
    pub fn new(n: usize, q: usize, boundary: Boundary, depth: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("N", "must be positive"));
        }
        if q == 0 {
            return Err(invalid("q", "must be positive"));
        }
        if boundary == Boundary::Periodic && (n < 4 || n % 2 == 1) {
            return Err(invalid("boundary", format!("periodic chains need even N >= 4, got N={n}")));
        }
        Ok(ChainSpec { n, q, boundary, depth, seed })
    }

    pub fn local_dim(&self) -> usize {
        2 * self.q
    }

    pub fn log2_dim(&self) -> f64 {
        self.n as f64 * (self.local_dim() as f64).log2()
    }

    pub fn check_memory(&self, cap_log2: f64) -> Result<()> {
        let needed = self.log2_dim();
        if needed > cap_log2 {
            return Err(Error::MemoryCap { needed, cap: cap_log2 });
        }
        Ok(())
    }

    /// Bonds of the two half-layers: `(0,1), (2,3), ...` then `(1,2), (3,4), ...`,
    /// with the wrap bond `(N-1, 0)` closing the second half on periodic chains.
    pub fn half_layers(&self) -> [Vec<(usize, usize)>; 2] {
        let n = self.n;
        let first: Vec<_> = (0..n.saturating_sub(1)).step_by(2).map(|i| (i, i + 1)).collect();
        let mut second: Vec<_> = (1..n.saturating_sub(1)).step_by(2).map(|i| (i, i + 1)).collect();
        if self.boundary == Boundary::Periodic {
            second.push((n - 1, 0));
        }
        [first, second]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductKind {
    TiltedFerro,
    TiltedAntiferro,
}

impl ProductKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProductKind::TiltedFerro => "ferro",
            ProductKind::TiltedAntiferro => "antiferro",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ferro" | "tf" | "tilted_ferro" => Some(ProductKind::TiltedFerro),
            "antiferro" | "taf" | "tilted_antiferro" => Some(ProductKind::TiltedAntiferro),
            _ => None,
        }
    }
}

/// Tilted product states `exp(-i Y theta/2)|alpha> (x) |0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductStateSpec {
    pub kind: ProductKind,
    pub theta: f64,
}

impl ProductStateSpec {
    pub fn new(kind: ProductKind, theta: f64) -> Result<Self> {
        if !theta.is_finite() || !(0.0..=core::f64::consts::PI).contains(&theta) {
            return Err(invalid("theta", format!("must lie in [0, pi], got {theta}")));
        }
        Ok(ProductStateSpec { kind, theta })
    }

    pub fn ferro(theta: f64) -> Self {
        ProductStateSpec { kind: ProductKind::TiltedFerro, theta }
    }

    pub fn antiferro(theta: f64) -> Self {
        ProductStateSpec { kind: ProductKind::TiltedAntiferro, theta }
    }

    /// Mean charge density.
    pub fn q0(&self) -> f64 {
        match self.kind {
            ProductKind::TiltedFerro => self.theta.cos() / 2.0,
            ProductKind::TiltedAntiferro => 0.0,
        }
    }

    pub fn alpha(&self, site: usize) -> usize {
        match self.kind {
            ProductKind::TiltedFerro => 0,
            ProductKind::TiltedAntiferro => site % 2,
        }
    }

    /// Spin amplitudes `(<0|., <1|.)` on `site`.
    pub fn spin_amplitudes(&self, site: usize) -> [f64; 2] {
        let (c, s) = ((self.theta / 2.0).cos(), (self.theta / 2.0).sin());
        if self.alpha(site) == 0 {
            [c, s]
        } else {
            [-s, c]
        }
    }

    pub fn local_vector(&self, site: usize, q: usize) -> Vec<C64> {
        let [a0, a1] = self.spin_amplitudes(site);
        let mut v = vec![C64::new(0.0, 0.0); 2 * q];
        v[0] = C64::new(a0, 0.0);
        v[q] = C64::new(a1, 0.0);
        v
    }

    pub fn check_chain(&self, chain: &ChainSpec) -> Result<()> {
        if self.kind == ProductKind::TiltedAntiferro && chain.n % 2 == 1 {
            return Err(Error::OddAntiferro(chain.n));
        }
        Ok(())
    }
}

/// Block structure of a two-site gate: pair index `p = l_first + d * l_second`
/// grouped by the number of up spins (0, 1, 2), i.e. by S = -1, 0, +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairLayout {
    pub q: usize,
    pub members: [Vec<usize>; 3],
}

impl PairLayout {
    pub fn new(q: usize) -> Self {
        let d = 2 * q;
        let mut members: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for p in 0..d * d {
            let (l1, l2) = (p % d, p / d);
            let up = usize::from(l1 < q) + usize::from(l2 < q);
            members[up].push(p);
        }
        PairLayout { q, members }
    }

    pub fn sector_dims(&self) -> [usize; 3] {
        [self.members[0].len(), self.members[1].len(), self.members[2].len()]
    }
}

/// Two-site gate `u(-1) + u(0) + u(+1)`, Haar-random in each charge block.
#[derive(Debug, Clone)]
pub struct SectorGate {
    pub q: usize,
    pub blocks: [Mat<C64>; 3],
}

/// Haar unitary from the QR factorization of a complex Ginibre matrix,
/// with the phases of diag(R) moved into Q.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<C64> {
    let mut z = Mat::<C64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            z[(i, j)] = C64::new(re, im) * FRAC_1_SQRT_2;
        }
    }
    let qr = z.qr();
    let mut u = qr.compute_Q();
    let r = qr.R();
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            u[(i, j)] *= phase;
        }
    }
    u
}

pub fn sample_sector_gate<R: Rng + ?Sized>(q: usize, rng: &mut R) -> SectorGate {
    let dims = [q * q, 2 * q * q, q * q];
    SectorGate { q, blocks: [haar_unitary(dims[0], rng), haar_unitary(dims[1], rng), haar_unitary(dims[2], rng)] }
}

impl SectorGate {
    /// Dense `4q^2 x 4q^2` matrix on the pair index of [`PairLayout`].
    pub fn full_matrix(&self) -> Mat<C64> {
        let layout = PairLayout::new(self.q);
        let dd = 4 * self.q * self.q;
        let mut m = Mat::<C64>::zeros(dd, dd);
        for (s, mem) in layout.members.iter().enumerate() {
            for (a, &pa) in mem.iter().enumerate() {
                for (b, &pb) in mem.iter().enumerate() {
                    m[(pa, pb)] = self.blocks[s][(a, b)];
                }
            }
        }
        m
    }

    fn flat(&self) -> [Vec<C64>; 3] {
        let f = |m: &Mat<C64>| {
            let n = m.nrows();
            let mut v = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    v.push(m[(i, j)]);
                }
            }
            v
        };
        [f(&self.blocks[0]), f(&self.blocks[1]), f(&self.blocks[2])]
    }
}

/// One sampled brick-wall layer, in application order.
#[derive(Debug, Clone)]
pub struct Layer {
    pub gates: Vec<(usize, usize, SectorGate)>,
}

pub fn sample_layer<R: Rng + ?Sized>(chain: &ChainSpec, rng: &mut R) -> Layer {
    let mut gates = Vec::new();
    for half in chain.half_layers() {
        for (i, j) in half {
            gates.push((i, j, sample_sector_gate(chain.q, rng)));
        }
    }
    Layer { gates }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amps: Vec<C64>,
    pub chain: ChainSpec,
}

pub fn tilted_product_state(spec: &ProductStateSpec, chain: &ChainSpec) -> Result<StateVector> {
    spec.check_chain(chain)?;
    chain.check_memory(DEFAULT_MEMORY_CAP_LOG2)?;
    let d = chain.local_dim();
    let mut amps = vec![C64::new(1.0, 0.0)];
    for site in 0..chain.n {
        let v = spec.local_vector(site, chain.q);
        let len = amps.len();
        let mut next = vec![C64::new(0.0, 0.0); len * d];
        for (l, vl) in v.iter().enumerate() {
            if vl.norm_sqr() == 0.0 {
                continue;
            }
            for (k, a) in amps.iter().enumerate() {
                next[l * len + k] = a * vl;
            }
        }
        amps = next;
    }
    Ok(StateVector { amps, chain: *chain })
}

fn insert_zero_digit(x: usize, place: usize, d: usize) -> usize {
    (x / place) * place * d + x % place
}

impl StateVector {
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies `gate` on sites `(i, j)`, with `i` the first site of the pair index.
    pub fn apply_gate(&mut self, gate: &SectorGate, i: usize, j: usize) {
        let q = self.chain.q;
        let d = 2 * q;
        let layout = PairLayout::new(q);
        let flat = gate.flat();
        let (pi, pj) = (d.pow(i as u32), d.pow(j as u32));
        let off: Vec<usize> = (0..d * d).map(|p| (p % d) * pi + (p / d) * pj).collect();
        let (plo, phi) = if pi < pj { (pi, pj) } else { (pj, pi) };
        let reduced = self.amps.len() / (d * d);
        let mut inb = vec![C64::new(0.0, 0.0); 2 * q * q];
        for r in 0..reduced {
            let base = insert_zero_digit(insert_zero_digit(r, plo, d), phi, d);
            for (s, mem) in layout.members.iter().enumerate() {
                let m = mem.len();
                for (a, &p) in mem.iter().enumerate() {
                    inb[a] = self.amps[base + off[p]];
                }
                let u = &flat[s];
                for (a, &p) in mem.iter().enumerate() {
                    let row = &u[a * m..(a + 1) * m];
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..m {
                        acc += row[b] * inb[b];
                    }
                    self.amps[base + off[p]] = acc;
                }
            }
        }
    }

    pub fn apply_layer(&mut self, layer: &Layer) {
        for (i, j, g) in &layer.gates {
            self.apply_gate(g, *i, *j);
        }
    }

    /// `<Z_j>` for every site.
    pub fn z_profile(&self) -> Vec<f64> {
        let n = self.chain.n;
        let q = self.chain.q;
        let d = 2 * q;
        let mut z = vec![0.0; n];
        for (idx, a) in self.amps.iter().enumerate() {
            let w = a.norm_sqr();
            if w == 0.0 {
                continue;
            }
            let mut x = idx;
            for zj in z.iter_mut() {
                let l = x % d;
                x /= d;
                *zj += if l < q { w } else { -w };
            }
        }
        z
    }

    /// `<Q>` with `Q = sum_j Z_j / 2`.
    pub fn charge_expectation(&self) -> f64 {
        self.z_profile().iter().sum::<f64>() / 2.0
    }
}

/// Evolves by `layers` freshly sampled brick-wall layers.
pub fn evolve<R: Rng + ?Sized>(state: &mut StateVector, layers: usize, rng: &mut R) {
    let chain = state.chain;
    for _ in 0..layers {
        let layer = sample_layer(&chain, rng);
        state.apply_layer(&layer);
    }
}

/// `<S^+_site>` with `S^+ = (X + iY)/sqrt 2 (x) 1_q`.
pub fn splus_expectation(state: &StateVector, site: usize) -> Result<C64> {
    let chain = &state.chain;
    if site >= chain.n {
        return Err(invalid("site", format!("{site} out of range for N={}", chain.n)));
    }
    let q = chain.q;
    let d = 2 * q;
    let place = d.pow(site as u32);
    let mut acc = C64::new(0.0, 0.0);
    for (idx, a) in state.amps.iter().enumerate() {
        let l = (idx / place) % d;
        if l < q {
            acc += a.conj() * state.amps[idx + q * place];
        }
    }
    Ok(acc * core::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionEstimate {
    pub d: f64,
    pub d_err: f64,
    pub r2: f64,
    pub times: Vec<usize>,
    pub variance: Vec<f64>,
    /// Mean excess charge at each time; exactly one flipped spin.
    pub total_charge: Vec<f64>,
}

/// Per-realization moments `(M0, M1, M2)` of the flipped-spin profile.
fn magnon_moments(chain: &ChainSpec, rng: &mut StreamRng) -> Result<Vec<[f64; 3]>> {
    let n = chain.n;
    let j0 = n / 2;
    let moments = |profile: &[f64]| {
        let mut m = [0.0; 3];
        for (j, &p) in profile.iter().enumerate() {
            let x = j as f64 - j0 as f64;
            m[0] += p;
            m[1] += x * p;
            m[2] += x * x * p;
        }
        m
    };
    let mut out = Vec::with_capacity(chain.depth + 1);
    if chain.q == 1 {
        // one up-to-down excitation on an all-up background spans only N states
        let layout = PairLayout::new(1);
        let mut psi = vec![C64::new(0.0, 0.0); n];
        psi[j0] = C64::new(1.0, 0.0);
        out.push(moments(&psi.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>()));
        for _ in 0..chain.depth {
            let layer = sample_layer(chain, rng);
            for (i, j, g) in &layer.gates {
                let w = g.blocks[2][(0, 0)];
                let first_down = layout.members[1].iter().position(|&p| p % 2 == 1).unwrap_or(0);
                let (ki, kj) = (first_down, 1 - first_down);
                let (ai, aj) = (psi[*i], psi[*j]);
                for (x, a) in psi.iter_mut().enumerate() {
                    if x != *i && x != *j {
                        *a *= w;
                    }
                }
                let u = &g.blocks[1];
                let mut v = [C64::new(0.0, 0.0); 2];
                v[ki] = ai;
                v[kj] = aj;
                psi[*i] = u[(ki, 0)] * v[0] + u[(ki, 1)] * v[1];
                psi[*j] = u[(kj, 0)] * v[0] + u[(kj, 1)] * v[1];
            }
            out.push(moments(&psi.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>()));
        }
    } else {
        let mut st = tilted_product_state(&ProductStateSpec::ferro(0.0), chain)?;
        let d = chain.local_dim();
        let mut flipped = vec![C64::new(0.0, 0.0); st.dim()];
        let place = d.pow(j0 as u32);
        for (idx, a) in st.amps.iter().enumerate() {
            if a.norm_sqr() > 0.0 {
                flipped[idx + chain.q * place] = *a;
            }
        }
        st.amps = flipped;
        let excess = |s: &StateVector| s.z_profile().iter().map(|z| (1.0 - z) / 2.0).collect::<Vec<_>>();
        out.push(moments(&excess(&st)));
        for _ in 0..chain.depth {
            evolve(&mut st, 1, rng);
            out.push(moments(&excess(&st)));
        }
    }
    Ok(out)
}

/// Diffusion constant from the spreading of one flipped spin on the theta=0
/// background: the averaged profile variance is fitted to `c + 2 D t`.
pub fn estimate_diffusion_constant(chain: &ChainSpec, samples: usize) -> Result<DiffusionEstimate> {
    if samples < 100 {
        return Err(invalid("samples", "at least 100 realizations"));
    }
    if chain.depth < 3 {
        return Err(invalid("depth", "at least 3 layers to fit a slope"));
    }
    let mut all = Vec::with_capacity(samples);
    for s in 0..samples {
        let mut r = rng::stream(chain.seed, rng::DOMAIN_MAGNON, s as u64);
        all.push(magnon_moments(chain, &mut r)?);
    }
    let t_len = chain.depth + 1;
    let variance_of = |idx: &[usize]| -> Vec<f64> {
        (0..t_len)
            .map(|t| {
                let m = idx.len() as f64;
                let m1 = idx.iter().map(|&k| all[k][t][1]).sum::<f64>() / m;
                let m2 = idx.iter().map(|&k| all[k][t][2]).sum::<f64>() / m;
                m2 - m1 * m1
            })
            .collect()
    };
    let every: Vec<usize> = (0..samples).collect();
    let variance = variance_of(&every);
    let times: Vec<usize> = (0..t_len).collect();
    let tf: Vec<f64> = times[1..].iter().map(|&t| t as f64).collect();
    let lf = fit::linear(&tf, &variance[1..])?;
    if lf.r2 < 0.9 {
        return Err(Error::Fit(format!("variance not linear in t (R^2 = {:.3})", lf.r2)));
    }
    let mut brng = rng::stream(chain.seed, rng::DOMAIN_BOOTSTRAP, 0);
    let d_err = stats::bootstrap_sd(samples, 200, &mut brng, |idx| {
        let v = variance_of(idx);
        fit::linear(&tf, &v[1..]).map(|f| f.slope / 2.0).unwrap_or(f64::NAN)
    });
    let total_charge = (0..t_len).map(|t| all.iter().map(|m| m[t][0]).sum::<f64>() / samples as f64).collect();
    Ok(DiffusionEstimate { d: lf.slope / 2.0, d_err, r2: lf.r2, times, variance, total_charge })
}
