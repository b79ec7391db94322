use crate::prelude::*;
use crate::qudit_sim::ProductStateSpec;
use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

/// `(mu, r, b)` with `mu = +1` (identity pairing) or `-1` (swap pairing) and
/// `r, b = +-1` twice the spins of the two paired copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaLabel {
    pub mu: i8,
    pub r: i8,
    pub b: i8,
}

/// Per-site replica states on the four-copy space `(ket1, bra1, ket2, bra2)`:
///
/// `|+,r,b> = sum |x1 x1 x2 x2>`, `|-,r,b> = sum |x1 x2 x2 x1>`, with `x1`
/// ranging over spin `r` and `x2` over spin `b` (all colors). At `q = 1`,
/// `|-,r,r>` coincides with `|+,r,r>` and is dropped, leaving six states.
#[derive(Debug, Clone)]
pub struct ReplicaBasis {
    pub q: usize,
    pub labels: Vec<ReplicaLabel>,
    /// Row-major `d_eff x d_eff` overlaps.
    pub gram: Vec<f64>,
    gram_inv: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

const SPINS: [i8; 2] = [1, -1];

impl ReplicaBasis {
    pub fn new(q: usize) -> Self {
        let mut labels = Vec::new();
        for mu in [1i8, -1] {
            for r in SPINS {
                for b in SPINS {
                    if q == 1 && mu == -1 && r == b {
                        continue;
                    }
                    labels.push(ReplicaLabel { mu, r, b });
                }
            }
        }
        let vectors: Vec<Vec<f64>> = labels.iter().map(|l| dense_vector(q, *l)).collect();
        let de = labels.len();
        let mut gram = vec![0.0; de * de];
        for i in 0..de {
            for j in 0..de {
                gram[i * de + j] = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
            }
        }
        let g = Mat::from_fn(de, de, |i, j| gram[i * de + j]);
        let inv = g.llt(faer::Side::Lower).expect("replica Gram matrix is positive definite").inverse();
        let gram_inv = (0..de * de).map(|k| inv[(k / de, k % de)]).collect();
        ReplicaBasis { q, labels, gram, gram_inv, vectors }
    }

    pub fn d_eff(&self) -> usize {
        self.labels.len()
    }

    pub fn local_dim(&self) -> usize {
        2 * self.q
    }

    /// Index of the state carrying `label`; at `q = 1`, `(-,r,r)` maps to `(+,r,r)`.
    pub fn index_of(&self, label: ReplicaLabel) -> usize {
        let l = if self.q == 1 && label.mu == -1 && label.r == label.b { ReplicaLabel { mu: 1, ..label } } else { label };
        self.labels.iter().position(|x| *x == l).expect("label in basis")
    }

    /// Dense four-copy vector of basis state `i`.
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    /// `<i| F>` for a linear form given as a dense four-copy tensor.
    pub fn overlaps(&self, form: &[C64]) -> Vec<C64> {
        self.vectors.iter().map(|v| v.iter().zip(form).map(|(a, f)| f * *a).sum()).collect()
    }

    /// Orthogonal projection onto the span: coefficients `G^{-1} <i|w>`.
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        let o: Vec<f64> = self.vectors.iter().map(|v| v.iter().zip(w).map(|(a, b)| a * b).sum()).collect();
        self.apply_gram_inv(&o)
    }

    pub fn apply_gram_inv(&self, o: &[f64]) -> Vec<f64> {
        let de = self.d_eff();
        (0..de).map(|i| (0..de).map(|j| self.gram_inv[i * de + j] * o[j]).sum()).collect()
    }

    pub fn apply_gram(&self, c: &[f64]) -> Vec<f64> {
        let de = self.d_eff();
        (0..de).map(|i| (0..de).map(|j| self.gram[i * de + j] * c[j]).sum()).collect()
    }

    /// `(G^{1/2}, G^{-1/2})`, row-major.
    pub fn gram_sqrt(&self) -> (Vec<f64>, Vec<f64>) {
        let de = self.d_eff();
        let g = Mat::from_fn(de, de, |i, j| self.gram[i * de + j]);
        let eig = g.self_adjoint_eigen(faer::Side::Lower).expect("symmetric eigensolver on the Gram matrix");
        let (u, l) = (eig.U(), eig.S().column_vector());
        let build = |p: f64| -> Vec<f64> {
            (0..de * de)
                .map(|k| {
                    let (i, j) = (k / de, k % de);
                    (0..de).map(|m| u[(i, m)] * l[m].powf(p) * u[(j, m)]).sum()
                })
                .collect()
        };
        (build(0.5), build(-0.5))
    }

    /// Overlaps of `sum_{r,b} r^a b^c |mu,r,b>` with basis state `i`, indexed
    /// `[mu = +,-][a][c][i]`; this is the Z-dressed frame in which the
    /// product-state components read `cos(theta)^(a+c)`.
    pub fn dressed_overlaps(&self) -> [[[Vec<f64>; 2]; 2]; 2] {
        let de = self.d_eff();
        let mut out: [[[Vec<f64>; 2]; 2]; 2] = Default::default();
        for (m, mu) in [1i8, -1].into_iter().enumerate() {
            for a in 0..2 {
                for c in 0..2 {
                    let mut z = vec![0.0; self.vectors[0].len()];
                    for r in SPINS {
                        for b in SPINS {
                            let w = f64::from(r).powi(a as i32) * f64::from(b).powi(c as i32);
                            for (zk, vk) in z.iter_mut().zip(dense_vector(self.q, ReplicaLabel { mu, r, b })) {
                                *zk += w * vk;
                            }
                        }
                    }
                    out[m][a][c] = (0..de).map(|i| z.iter().zip(&self.vectors[i]).map(|(x, y)| x * y).sum()).collect();
                }
            }
        }
        out
    }
}

fn spin_states(q: usize, s: i8) -> core::ops::Range<usize> {
    if s > 0 {
        0..q
    } else {
        q..2 * q
    }
}

pub(crate) fn four_index(d: usize, a1: usize, b1: usize, a2: usize, b2: usize) -> usize {
    ((a1 * d + b1) * d + a2) * d + b2
}

fn dense_vector(q: usize, l: ReplicaLabel) -> Vec<f64> {
    let d = 2 * q;
    let mut v = vec![0.0; d * d * d * d];
    for x1 in spin_states(q, l.r) {
        for x2 in spin_states(q, l.b) {
            let k = if l.mu > 0 { four_index(d, x1, x1, x2, x2) } else { four_index(d, x1, x2, x2, x1) };
            v[k] += 1.0;
        }
    }
    v
}

/// Single-site linear forms on the four-copy space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalForm {
    /// `tr rho1 tr rho2`
    Identity,
    /// `tr(rho1 U rho2 U^dagger)` with `U = exp(i phi Z/2)`; `phi = 0` is the swap.
    TwistedSwap(f64),
    /// `tr(S+ rho1) tr(S- rho2)`
    Splus,
}

impl LocalForm {
    pub fn dense(self, q: usize) -> Vec<C64> {
        let d = 2 * q;
        let z = |x: usize| if x < q { 1.0 } else { -1.0 };
        let splus = |x: usize, y: usize| {
            if x < q && y >= q && x == y - q {
                core::f64::consts::SQRT_2
            } else {
                0.0
            }
        };
        let mut f = vec![C64::new(0.0, 0.0); d * d * d * d];
        for a1 in 0..d {
            for b1 in 0..d {
                for a2 in 0..d {
                    for b2 in 0..d {
                        let v = match self {
                            LocalForm::Identity => {
                                if a1 == b1 && a2 == b2 {
                                    C64::new(1.0, 0.0)
                                } else {
                                    C64::new(0.0, 0.0)
                                }
                            }
                            LocalForm::TwistedSwap(phi) => {
                                if a1 == b2 && b1 == a2 {
                                    C64::from_polar(1.0, phi * (z(b1) - z(a1)) / 2.0)
                                } else {
                                    C64::new(0.0, 0.0)
                                }
                            }
                            LocalForm::Splus => C64::new(splus(b1, a1) * splus(a2, b2), 0.0),
                        };
                        f[four_index(d, a1, b1, a2, b2)] = v;
                    }
                }
            }
        }
        f
    }
}

/// Four-copy vector of `rho (x) rho` for the local state of `spec` at `site`.
pub fn local_product_replica(spec: &ProductStateSpec, site: usize, q: usize) -> Vec<f64> {
    let v = spec.local_vector(site, q);
    let d = 2 * q;
    let mut w = vec![0.0; d * d * d * d];
    for a1 in 0..d {
        for b1 in 0..d {
            let r1 = (v[a1] * v[b1].conj()).re;
            if r1 == 0.0 {
                continue;
            }
            for a2 in 0..d {
                for b2 in 0..d {
                    w[four_index(d, a1, b1, a2, b2)] = r1 * (v[a2] * v[b2].conj()).re;
                }
            }
        }
    }
    w
}
