//! Large-q Markov process: red and blue exclusion particles emitted by a
//! random-walking membrane that sits on one bond of the chain.
//!
//! Two-site configurations are 4-bit indices `r_j<<3 | b_j<<2 | r_{j+1}<<1 | b_{j+1}`;
//! kernels are column-stochastic, column = configuration before the update.

use crate::error::{invalid, Error, Result};
use crate::prelude::*;
use crate::rng::{self, StreamRng};
use crate::stats;
use rand::Rng;

pub type Kernel16 = [[f64; 16]; 16];

/// Entries with magnitude below this are clamped to zero.
pub const CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSiteKernel {
    pub m: Kernel16,
    pub l: Kernel16,
    pub r: Kernel16,
    /// Total magnitude removed by clamping.
    pub clamped: f64,
}

type M4 = [[f64; 4]; 4];

fn kron2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> M4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[i >> 1][j >> 1] * b[i & 1][j & 1];
        }
    }
    out
}

fn mul4(a: &M4, b: &M4) -> M4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn lin4(terms: &[(f64, M4)]) -> M4 {
    let mut out = [[0.0; 4]; 4];
    for (c, m) in terms {
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] += c * m[i][j];
            }
        }
    }
    out
}

/// Single-color operators on `(n_j, n_{j+1})`, index `n_j << 1 | n_{j+1}`:
/// the swap, and `L = (3 X1 + X2 + iY1 Z2 - Z1 iY2) / 4`, `R = S L S`.
pub fn single_color_operators() -> (M4, M4, M4) {
    let id = [[1.0, 0.0], [0.0, 1.0]];
    let x = [[0.0, 1.0], [1.0, 0.0]];
    let z = [[1.0, 0.0], [0.0, -1.0]];
    let iy = [[0.0, 1.0], [-1.0, 0.0]];
    let mut swap = [[0.0; 4]; 4];
    for c in 0..4 {
        swap[((c & 1) << 1) | (c >> 1)][c] = 1.0;
    }
    let l = lin4(&[(0.75, kron2(x, id)), (0.25, kron2(id, x)), (0.25, kron2(iy, z)), (-0.25, kron2(z, iy))]);
    let r = mul4(&mul4(&swap, &l), &swap);
    (swap, l, r)
}

/// `A (x) B` acting on red bits with `A` and blue bits with `B`.
fn two_color(a: &M4, b: &M4) -> Kernel16 {
    let red = |c: usize| ((c >> 3) & 1) << 1 | ((c >> 1) & 1);
    let blue = |c: usize| ((c >> 2) & 1) << 1 | (c & 1);
    let mut out = [[0.0; 16]; 16];
    for i in 0..16 {
        for j in 0..16 {
            out[i][j] = a[red(i)][red(j)] * b[blue(i)][blue(j)];
        }
    }
    out
}

/// `M = (1+S_r)(1+S_b)/4`, `L = (M + L_r L_b)/2`, `R = (M + R_r R_b)/2`.
pub fn build_kernels() -> Result<TwoSiteKernel> {
    let (s, l1, r1) = single_color_operators();
    let id: M4 = core::array::from_fn(|i| core::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }));
    let half = lin4(&[(0.5, id), (0.5, s)]);
    let m = two_color(&half, &half);
    let ll = two_color(&l1, &l1);
    let rr = two_color(&r1, &r1);
    let mut l = [[0.0; 16]; 16];
    let mut r = [[0.0; 16]; 16];
    for i in 0..16 {
        for j in 0..16 {
            l[i][j] = 0.5 * (m[i][j] + ll[i][j]);
            r[i][j] = 0.5 * (m[i][j] + rr[i][j]);
        }
    }
    let mut clamped = 0.0;
    for k in [&mut l, &mut r] {
        for row in k.iter_mut() {
            for v in row.iter_mut() {
                if *v < -1e-8 {
                    return Err(Error::Linalg("negative transition probability in membrane kernel"));
                }
                if v.abs() < CLAMP {
                    clamped += v.abs();
                    *v = 0.0;
                }
            }
        }
    }
    Ok(TwoSiteKernel { m, l, r, clamped })
}

/// Column-wise cumulative distributions for sampling.
#[derive(Debug, Clone)]
struct Sampler {
    cdf: [[f64; 16]; 16],
    last: [usize; 16],
}

impl Sampler {
    fn new(k: &Kernel16) -> Self {
        let mut cdf = [[0.0; 16]; 16];
        let mut last = [0; 16];
        for c in 0..16 {
            let mut acc = 0.0;
            for i in 0..16 {
                acc += k[i][c];
                cdf[c][i] = acc;
                if k[i][c] > 0.0 {
                    last[c] = i;
                }
            }
        }
        Sampler { cdf, last }
    }

    fn draw(&self, from: usize, u: f64) -> usize {
        self.cdf[from].iter().position(|&c| u < c).unwrap_or(self.last[from])
    }
}

#[derive(Debug, Clone)]
pub struct KernelSamplers {
    m: Sampler,
    l: Sampler,
    r: Sampler,
}

impl KernelSamplers {
    pub fn new(k: &TwoSiteKernel) -> Self {
        KernelSamplers { m: Sampler::new(&k.m), l: Sampler::new(&k.l), r: Sampler::new(&k.r) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsepConfig {
    pub red: Vec<u8>,
    pub blue: Vec<u8>,
    /// Bond index `b` of the membrane, i.e. `J = b + 1/2` between sites `b` and `b+1`.
    pub interface: usize,
    pub time: usize,
    /// Set once the membrane tried to leave the chain; it is reflected instead.
    pub hit_wall: bool,
}

impl SsepConfig {
    pub fn empty(n: usize, interface: usize) -> Result<Self> {
        if n < 2 || interface + 1 >= n {
            return Err(invalid("interface", format!("bond {interface} outside a chain of {n}")));
        }
        Ok(SsepConfig { red: vec![0; n], blue: vec![0; n], interface, time: 0, hit_wall: false })
    }

    /// Independent Bernoulli filling of both colors with the given density.
    pub fn bernoulli<R: Rng + ?Sized>(n: usize, interface: usize, density: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(invalid("density", "must lie in [0, 1]"));
        }
        let mut c = Self::empty(n, interface)?;
        for j in 0..n {
            c.red[j] = u8::from(rng.random::<f64>() < density);
            c.blue[j] = u8::from(rng.random::<f64>() < density);
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.red.len()
    }

    pub fn is_empty(&self) -> bool {
        self.red.is_empty()
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.red.iter().map(|&x| x as usize).sum(), self.blue.iter().map(|&x| x as usize).sum())
    }

    fn pair(&self, j: usize) -> usize {
        (self.red[j] as usize) << 3 | (self.blue[j] as usize) << 2 | (self.red[j + 1] as usize) << 1 | self.blue[j + 1] as usize
    }

    fn set_pair(&mut self, j: usize, c: usize) {
        self.red[j] = ((c >> 3) & 1) as u8;
        self.blue[j] = ((c >> 2) & 1) as u8;
        self.red[j + 1] = ((c >> 1) & 1) as u8;
        self.blue[j + 1] = (c & 1) as u8;
    }

    fn occupied(&self, j: usize) -> bool {
        self.red[j] | self.blue[j] != 0
    }
}

/// Tracks the smallest window containing all particles and the membrane.
fn window(c: &SsepConfig) -> (usize, usize) {
    let n = c.len();
    let lo = (0..n).find(|&j| c.occupied(j)).unwrap_or(n).min(c.interface);
    let hi = (0..n).rev().find(|&j| c.occupied(j)).unwrap_or(0).max(c.interface + 1);
    (lo, hi)
}

fn half_step<R: Rng + ?Sized>(c: &mut SsepConfig, s: &KernelSamplers, parity: usize, lo: &mut usize, hi: &mut usize, rng: &mut R) {
    let n = c.len();
    let start = lo.saturating_sub(1);
    let first = start + ((start + parity) & 1);
    let end = (*hi + 1).min(n - 1);
    let mut j = first;
    let mut moved: Option<usize> = None;
    while j < end {
        let from = c.pair(j);
        if j == c.interface && moved.is_none() {
            let left = rng.random::<f64>() < 0.5;
            let to = if left { s.l.draw(from, rng.random()) } else { s.r.draw(from, rng.random()) };
            c.set_pair(j, to);
            let next = if left { j.checked_sub(1) } else { Some(j + 1).filter(|&b| b + 1 < n) };
            match next {
                Some(b) => moved = Some(b),
                None => {
                    c.hit_wall = true;
                    moved = Some(j);
                }
            }
        } else if from != 0 {
            let to = s.m.draw(from, rng.random());
            c.set_pair(j, to);
        }
        j += 2;
    }
    if let Some(b) = moved {
        c.interface = b;
    }
    if c.hit_wall {
        let (l, h) = window(c);
        *lo = l;
        *hi = h;
    } else {
        *lo = (*lo).min(c.interface).saturating_sub(1);
        *hi = (*hi + 1).max(c.interface + 1).min(n - 1);
    }
}

/// One brick-wall layer: bonds `(0,1), (2,3), ...` then `(1,2), (3,4), ...`.
/// The membrane bond is updated by `L` (moving one bond left) or `R` (right)
/// with probability 1/2 each; every other bond by `M`.
pub fn step<R: Rng + ?Sized>(c: &mut SsepConfig, s: &KernelSamplers, rng: &mut R) {
    let (mut lo, mut hi) = window(c);
    half_step(c, s, 0, &mut lo, &mut hi, rng);
    half_step(c, s, 1, &mut lo, &mut hi, rng);
    c.time += 1;
}

/// Runs `t` layers from `initial`, on stream `index` of `seed`.
pub fn run_trajectory(initial: &SsepConfig, s: &KernelSamplers, t: usize, seed: u64, index: u64) -> SsepConfig {
    let mut rng = rng::stream(seed, rng::DOMAIN_SSEP, index);
    run_with(initial.clone(), s, t, &mut rng)
}

/// Summaries after each of the increasing layer counts in `checkpoints`, on the
/// same stream as [`run_trajectory`].
pub fn run_checkpoints(initial: &SsepConfig, s: &KernelSamplers, checkpoints: &[usize], seed: u64, index: u64) -> Vec<TrajectorySummary> {
    let mut rng = rng::stream(seed, rng::DOMAIN_SSEP, index);
    let mut c = initial.clone();
    let mut out = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        let dt = t.saturating_sub(c.time);
        c = run_with(c, s, dt, &mut rng);
        out.push(TrajectorySummary::from(&c));
    }
    out
}

fn run_with(mut c: SsepConfig, s: &KernelSamplers, t: usize, rng: &mut StreamRng) -> SsepConfig {
    let (mut lo, mut hi) = window(&c);
    for _ in 0..t {
        half_step(&mut c, s, 0, &mut lo, &mut hi, rng);
        half_step(&mut c, s, 1, &mut lo, &mut hi, rng);
        c.time += 1;
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityEstimate {
    /// `t^{-1/2} ln E[exp(lambda N_final)]`.
    pub value: f64,
    pub lambda: f64,
    pub samples: usize,
    pub std_error: f64,
    /// Trajectories whose membrane reached a chain end.
    pub wall_hits: usize,
}

/// Final particle numbers and membrane position of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectorySummary {
    pub n_red: usize,
    pub n_blue: usize,
    pub interface: usize,
    pub hit_wall: bool,
}

impl From<&SsepConfig> for TrajectorySummary {
    fn from(c: &SsepConfig) -> Self {
        let (n_red, n_blue) = c.counts();
        TrajectorySummary { n_red, n_blue, interface: c.interface, hit_wall: c.hit_wall }
    }
}

/// Empty chain of `n` sites with the membrane on the central bond.
pub fn purity_initial(n: usize) -> Result<SsepConfig> {
    if n < 4 {
        return Err(invalid("N", "need at least 4 sites"));
    }
    SsepConfig::empty(n, n / 2 - 1)
}

pub fn purity_trajectory(n: usize, t: usize, seed: u64, index: u64, s: &KernelSamplers) -> Result<TrajectorySummary> {
    let init = purity_initial(n)?;
    Ok(TrajectorySummary::from(&run_trajectory(&init, s, t, seed, index)))
}

/// Rate estimate from per-trajectory summaries, `lambda = ln cos(theta)`.
pub fn reduce_purity_rate(theta: f64, t: usize, summaries: &[TrajectorySummary], seed: u64) -> Result<PurityEstimate> {
    if t == 0 {
        return Err(invalid("t", "must be positive"));
    }
    if summaries.len() < 2 {
        return Err(invalid("trajectories", "need at least 2"));
    }
    let c = theta.cos();
    if c <= 0.0 {
        return Err(invalid("theta", "need cos(theta) > 0"));
    }
    let lambda = c.ln();
    let w: Vec<f64> = summaries.iter().map(|s| (lambda * (s.n_red + s.n_blue) as f64).exp()).collect();
    let st = (t as f64).sqrt();
    let rate = |ix: &mut dyn Iterator<Item = usize>| {
        let (sum, n) = ix.fold((0.0, 0usize), |(s, n), i| (s + w[i], n + 1));
        (sum / n as f64).ln() / st
    };
    let value = rate(&mut (0..w.len()));
    let mut brng = rng::stream(seed, rng::DOMAIN_BOOTSTRAP, 0);
    let se = stats::bootstrap_sd(w.len(), 200, &mut brng, |ix| rate(&mut ix.iter().copied()));
    let wall_hits = summaries.iter().filter(|s| s.hit_wall).count();
    Ok(PurityEstimate { value, lambda, samples: w.len(), std_error: se, wall_hits })
}

/// Sequential estimator; the harness runs the same trajectories in parallel.
pub fn estimate_purity_rate(theta: f64, t: usize, n: usize, trajectories: usize, seed: u64) -> Result<PurityEstimate> {
    let s = KernelSamplers::new(&build_kernels()?);
    let summaries = (0..trajectories as u64).map(|i| purity_trajectory(n, t, seed, i, &s)).collect::<Result<Vec<_>>>()?;
    reduce_purity_rate(theta, t, &summaries, seed)
}

/// Mean red density at offsets `k` from the membrane: offset 0 is the site just
/// right of it, -1 the site just left.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub offsets: Vec<i64>,
    pub density: Vec<f64>,
    pub error: Vec<f64>,
    pub samples: usize,
}

pub fn density_profile(finals: &[SsepConfig], half_width: usize) -> Result<DensityProfile> {
    if finals.len() < 2 {
        return Err(invalid("trajectories", "need at least 2"));
    }
    let hw = half_width as i64;
    let offsets: Vec<i64> = (-hw..hw).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(finals.len()); offsets.len()];
    for c in finals {
        let n = c.len() as i64;
        for (k, &o) in offsets.iter().enumerate() {
            let j = c.interface as i64 + 1 + o;
            let v = if (0..n).contains(&j) { c.red[j as usize] as f64 } else { 0.0 };
            cols[k].push(v);
        }
    }
    let (density, error) = cols.iter().map(|c| stats::mean_se(c)).unzip();
    Ok(DensityProfile { offsets, density, error, samples: finals.len() })
}
