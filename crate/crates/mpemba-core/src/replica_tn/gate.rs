use super::basis::{ReplicaBasis, ReplicaLabel};
use crate::prelude::*;

/// Haar-averaged action of one sector gate on a bond, in the replica basis.
/// Row-major `d_eff^2 x d_eff^2`; pair index `s1 * d_eff + s2`.
#[derive(Debug, Clone)]
pub struct TransferGate {
    pub d_eff: usize,
    pub matrix: Vec<f64>,
}

impl TransferGate {
    pub fn dim(&self) -> usize {
        self.d_eff * self.d_eff
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.matrix[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }
}

/// `T = sum_{S1,S2} C pinv(C^T G2 C) C^T G2`, where the two columns of `C` are
/// `|I^+_{S1 S2}>` (identity pairing) and `|I^->` (swap pairing) restricted to
/// total two-site spins `S1` on copy 1 and `S2` on copy 2, and `G2 = G (x) G`.
/// This is the orthogonal projector onto the Haar-invariant replica vectors,
/// i.e. the second-moment Weingarten average.
pub fn build_transfer_gate(basis: &ReplicaBasis) -> TransferGate {
    let de = basis.d_eff();
    let n = de * de;
    let g2 = |i: usize, j: usize| basis.gram[(i / de) * de + j / de] * basis.gram[(i % de) * de + j % de];
    let mut t = vec![0.0; n * n];
    let spins = [1i8, -1];
    for s1 in [-2i8, 0, 2] {
        for s2 in [-2i8, 0, 2] {
            let mut cols = [vec![0.0; n], vec![0.0; n]];
            for (m, mu) in [1i8, -1].into_iter().enumerate() {
                for r in spins {
                    for b in spins {
                        let (rp, bp) = (s1 - r, s2 - b);
                        if rp.abs() != 1 || bp.abs() != 1 {
                            continue;
                        }
                        let i = basis.index_of(ReplicaLabel { mu, r, b });
                        let j = basis.index_of(ReplicaLabel { mu, r: rp, b: bp });
                        cols[m][i * de + j] += 1.0;
                    }
                }
            }
            let gc: Vec<Vec<f64>> = cols.iter().map(|c| (0..n).map(|i| (0..n).map(|j| g2(i, j) * c[j]).sum()).collect()).collect();
            let mut gm = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    gm[a][b] = cols[a].iter().zip(&gc[b]).map(|(x, y)| x * y).sum();
                }
            }
            let p = pinv2(gm);
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            acc += cols[a][i] * p[a][b] * gc[b][j];
                        }
                    }
                    t[i * n + j] += acc;
                }
            }
        }
    }
    TransferGate { d_eff: de, matrix: t }
}

fn pinv2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let (a, b, d) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (l1, l2) = (tr + disc, tr - disc);
    let scale = l1.abs().max(l2.abs());
    if scale == 0.0 {
        return [[0.0; 2]; 2];
    }
    let (v1, v2) = if b.abs() > 1e-300 {
        let n1 = ((l1 - d) * (l1 - d) + b * b).sqrt();
        let v1 = [(l1 - d) / n1, b / n1];
        ([v1[0], v1[1]], [-v1[1], v1[0]])
    } else if a >= d {
        ([1.0, 0.0], [0.0, 1.0])
    } else {
        ([0.0, 1.0], [1.0, 0.0])
    };
    let mut out = [[0.0; 2]; 2];
    for (l, v) in [(l1, v1), (l2, v2)] {
        if l.abs() > 1e-12 * scale {
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += v[i] * v[j] / l;
                }
            }
        }
    }
    out
}
