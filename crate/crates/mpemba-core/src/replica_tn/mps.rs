use super::gate::TransferGate;
use crate::error::{Error, Result};
use crate::prelude::*;
use faer::Mat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Maximal relative squared weight discarded per SVD.
    pub cutoff: f64,
    /// Exceeding this bond dimension is an error, not a truncation.
    pub max_bond: Option<usize>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { cutoff: 1e-15, max_bond: None }
    }
}

impl TruncationPolicy {
    pub fn with_cutoff(cutoff: f64) -> Self {
        TruncationPolicy { cutoff, ..Default::default() }
    }
}

/// Real MPS over the replica basis. Tensor `k` is row-major `(bond[k], d, bond[k+1])`.
/// The represented vector is `exp(log_scale)` times the tensor-train product.
#[derive(Debug, Clone)]
pub struct ReplicaMps {
    pub d: usize,
    pub tensors: Vec<Vec<f64>>,
    pub bond: Vec<usize>,
    pub log_scale: f64,
    center: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepStats {
    pub max_chi: usize,
    /// Largest relative discarded weight over the bonds touched.
    pub discarded: f64,
}

impl ReplicaMps {
    pub fn product(d: usize, sites: Vec<Vec<f64>>) -> Self {
        let n = sites.len();
        assert!(sites.iter().all(|s| s.len() == d));
        ReplicaMps { d, tensors: sites, bond: vec![1; n + 1], log_scale: 0.0, center: 0 }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn max_bond(&self) -> usize {
        self.bond.iter().copied().max().unwrap_or(1)
    }

    fn mat(&self, k: usize, rows: usize, cols: usize) -> Mat<f64> {
        let t = &self.tensors[k];
        Mat::from_fn(rows, cols, |i, j| t[i * cols + j])
    }

    fn store(&mut self, k: usize, m: &Mat<f64>) {
        let (rows, cols) = (m.nrows(), m.ncols());
        let mut t = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                t[i * cols + j] = m[(i, j)];
            }
        }
        self.tensors[k] = t;
    }

    fn shift_right(&mut self) {
        let (k, d) = (self.center, self.d);
        let (l, r) = (self.bond[k], self.bond[k + 1]);
        let qr = self.mat(k, l * d, r).qr();
        let q = qr.compute_thin_Q();
        let rr = qr.thin_R().to_owned();
        let r2 = self.bond[k + 2];
        let next = &rr * self.mat(k + 1, r, d * r2);
        self.bond[k + 1] = q.ncols();
        self.store(k, &q);
        self.store(k + 1, &next);
        self.center = k + 1;
    }

    fn shift_left(&mut self) {
        let (k, d) = (self.center, self.d);
        let (l, r) = (self.bond[k], self.bond[k + 1]);
        let qr = self.mat(k, l, d * r).transpose().to_owned().qr();
        let q = qr.compute_thin_Q();
        let rr = qr.thin_R().to_owned();
        let l0 = self.bond[k - 1];
        let prev = self.mat(k - 1, l0 * d, l) * rr.transpose();
        self.bond[k] = q.ncols();
        self.store(k, &q.transpose().to_owned());
        self.store(k - 1, &prev);
        self.center = k - 1;
    }

    fn move_center(&mut self, to: usize) {
        while self.center < to {
            self.shift_right();
        }
        while self.center > to {
            self.shift_left();
        }
    }

    /// Gate on bond `(k, k+1)`; the orthogonality center must sit on the bond
    /// and ends on `k+1` if `rightward`, else on `k`.
    fn apply_bond(&mut self, gate: &TransferGate, k: usize, rightward: bool, policy: &TruncationPolicy, layer: usize, stats: &mut SweepStats) -> Result<()> {
        let d = self.d;
        let (l, m, r) = (self.bond[k], self.bond[k + 1], self.bond[k + 2]);
        let theta = self.mat(k, l * d, m) * self.mat(k + 1, m, d * r);
        let dd = d * d;
        let x = Mat::from_fn(dd, l * r, |p, c| {
            let (s1, s2) = (p / d, p % d);
            let (li, ri) = (c / r, c % r);
            theta[(li * d + s1, s2 * r + ri)]
        });
        let tm = Mat::from_fn(dd, dd, |i, j| gate.matrix[i * dd + j]);
        let y = tm * x;
        let mm = Mat::from_fn(l * d, d * r, |row, col| {
            let (li, t1) = (row / d, row % d);
            let (t2, ri) = (col / r, col % r);
            y[(t1 * d + t2, li * r + ri)]
        });
        let svd = mm.thin_svd().map_err(|_| Error::Linalg("svd did not converge"))?;
        let s = svd.S().column_vector();
        let total: f64 = (0..s.nrows()).map(|i| s[i] * s[i]).sum();
        if total == 0.0 || !total.is_finite() {
            return Err(Error::Linalg("vanishing or non-finite two-site tensor"));
        }
        let mut keep = s.nrows();
        let mut dropped = 0.0;
        while keep > 1 {
            let w = s[keep - 1] * s[keep - 1];
            if w == 0.0 || dropped + w <= policy.cutoff * total {
                dropped += w;
                keep -= 1;
            } else {
                break;
            }
        }
        if let Some(cap) = policy.max_bond {
            if keep > cap {
                return Err(Error::BondOverflow { layer, bond: k, chi: keep, cap });
            }
        }
        let kept: f64 = (total - dropped).max(0.0);
        let norm = kept.sqrt();
        self.log_scale += norm.ln();
        let u = svd.U();
        let v = svd.V();
        let left = if rightward {
            Mat::from_fn(l * d, keep, |i, j| u[(i, j)])
        } else {
            Mat::from_fn(l * d, keep, |i, j| u[(i, j)] * s[j] / norm)
        };
        let right = if rightward {
            Mat::from_fn(keep, d * r, |i, j| v[(j, i)] * s[i] / norm)
        } else {
            Mat::from_fn(keep, d * r, |i, j| v[(j, i)])
        };
        self.bond[k + 1] = keep;
        self.store(k, &left);
        self.store(k + 1, &right);
        self.center = if rightward { k + 1 } else { k };
        stats.max_chi = stats.max_chi.max(keep);
        stats.discarded = stats.discarded.max(dropped / total);
        Ok(())
    }

    /// One brick-wall half-layer on the listed bonds `(k, k+1)`, swept
    /// left-to-right if `rightward`.
    pub fn apply_half_layer(&mut self, gate: &TransferGate, bonds: &[usize], rightward: bool, policy: &TruncationPolicy, layer: usize) -> Result<SweepStats> {
        let mut stats = SweepStats { max_chi: self.max_bond(), discarded: 0.0 };
        if self.len() < 2 {
            return Ok(stats);
        }
        let mut order: Vec<usize> = bonds.to_vec();
        order.sort_unstable();
        if !rightward {
            order.reverse();
        }
        for &k in &order {
            if k + 1 >= self.len() {
                return Err(crate::error::invalid("bond", format!("bond ({k},{}) outside an open chain of {}", k + 1, self.len())));
            }
            self.move_center(if rightward { k } else { k + 1 });
            self.apply_bond(gate, k, rightward, policy, layer, &mut stats)?;
        }
        self.move_center(if rightward { self.len() - 1 } else { 0 });
        stats.max_chi = stats.max_chi.max(self.max_bond());
        Ok(stats)
    }

    /// Contraction with per-site linear forms over sites `range`, from the left:
    /// returns `(v, log)` with `v` normalized and `exp(log) * v` the exact environment.
    pub fn left_env(&self, forms: &[Vec<C64>], range: core::ops::Range<usize>, start: (Vec<C64>, f64)) -> (Vec<C64>, f64) {
        let (mut env, mut log) = start;
        let d = self.d;
        for k in range {
            let (l, r) = (self.bond[k], self.bond[k + 1]);
            let t = &self.tensors[k];
            let f = &forms[k];
            let mut next = vec![C64::new(0.0, 0.0); r];
            for li in 0..l {
                let e = env[li];
                if e == C64::new(0.0, 0.0) {
                    continue;
                }
                for s in 0..d {
                    let w = e * f[s];
                    if w == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let row = &t[(li * d + s) * r..(li * d + s + 1) * r];
                    for (n, a) in next.iter_mut().zip(row) {
                        *n += w * *a;
                    }
                }
            }
            let nrm = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nrm > 0.0 {
                for z in next.iter_mut() {
                    *z /= nrm;
                }
                log += nrm.ln();
            } else {
                log = f64::NEG_INFINITY;
            }
            env = next;
        }
        (env, log)
    }

    pub fn right_env(&self, forms: &[Vec<C64>], range: core::ops::Range<usize>, start: (Vec<C64>, f64)) -> (Vec<C64>, f64) {
        let (mut env, mut log) = start;
        let d = self.d;
        for k in range.rev() {
            let (l, r) = (self.bond[k], self.bond[k + 1]);
            let t = &self.tensors[k];
            let f = &forms[k];
            let mut next = vec![C64::new(0.0, 0.0); l];
            for (li, n) in next.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for s in 0..d {
                    if f[s] == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let row = &t[(li * d + s) * r..(li * d + s + 1) * r];
                    let dot: C64 = row.iter().zip(&env).map(|(a, e)| e * *a).sum();
                    acc += f[s] * dot;
                }
                *n = acc;
            }
            let nrm = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nrm > 0.0 {
                for z in next.iter_mut() {
                    *z /= nrm;
                }
                log += nrm.ln();
            } else {
                log = f64::NEG_INFINITY;
            }
            env = next;
        }
        (env, log)
    }

    pub fn left_edge(&self) -> (Vec<C64>, f64) {
        (vec![C64::new(1.0, 0.0)], self.log_scale)
    }

    pub fn right_edge(&self) -> (Vec<C64>, f64) {
        (vec![C64::new(1.0, 0.0)], 0.0)
    }

    /// `sum_s f_s c_s` for per-site forms given as overlaps with the basis states.
    pub fn contract_forms(&self, forms: &[Vec<C64>]) -> C64 {
        let (l, ll) = self.left_env(forms, 0..self.len(), self.left_edge());
        join(&l, ll, &[C64::new(1.0, 0.0)], 0.0)
    }
}

pub(crate) fn join(left: &[C64], ll: f64, right: &[C64], lr: f64) -> C64 {
    let dot: C64 = left.iter().zip(right).map(|(a, b)| a * b).sum();
    if dot == C64::new(0.0, 0.0) {
        return dot;
    }
    dot * (ll + lr).exp()
}
