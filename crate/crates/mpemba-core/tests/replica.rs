use mpemba_core::asymmetry_exact::{product_state_decohered_purity, SiteRange};
use mpemba_core::qudit_sim::{sample_sector_gate, Boundary, ChainSpec, ProductStateSpec};
use mpemba_core::replica_tn::*;
use mpemba_core::rng;
use mpemba_core::trace::{AsymmetryTrace, Estimator, Observable, TraceMeta};
use mpemba_core::Complex64 as C64;

fn chain(n: usize, q: usize) -> ChainSpec {
    ChainSpec::new(n, q, Boundary::Open, 0, 0).unwrap()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `sum_k [C(N,k) p^k (1-p)^(N-k)]^2`, `p = cos^2(theta/2)`.
fn binomial_decohered_purity(n_a: usize, theta: f64) -> f64 {
    let p = (theta / 2.0).cos().powi(2);
    (0..=n_a).map(|k| (binom(n_a, k) * p.powi(k as i32) * (1.0 - p).powi((n_a - k) as i32)).powi(2)).sum()
}

#[test]
fn gram_structure() {
    for q in [2, 3] {
        let b = ReplicaBasis::new(q);
        let de = b.d_eff();
        assert_eq!(de, 8);
        let qq = (q * q) as f64;
        for i in 0..de {
            for j in 0..de {
                let (li, lj) = (b.labels[i], b.labels[j]);
                let g = b.gram[i * de + j];
                assert_eq!(g, b.gram[j * de + i]);
                let expect = if i == j {
                    qq
                } else if li.r == lj.r && li.b == lj.b && li.r == li.b {
                    q as f64
                } else {
                    0.0
                };
                assert_eq!(g, expect, "q={q} {li:?} {lj:?}");
            }
        }
    }
    let b1 = ReplicaBasis::new(1);
    assert_eq!(b1.d_eff(), 6);
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(b1.gram[i * 6 + j], if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn gate_shapes_and_trace_fixed_point() {
    for (q, de) in [(1, 6), (2, 8), (3, 8)] {
        let e = ReplicaEngine::new(q).unwrap();
        assert_eq!(e.gate.dim(), de * de);
        let id = e.basis.overlaps(&LocalForm::Identity.dense(q));
        let n = de * de;
        for col in 0..n {
            let lhs: f64 = (0..n).map(|row| (id[row / de] * id[row % de]).re * e.gate.matrix[row * n + col]).sum();
            let rhs = (id[col / de] * id[col % de]).re;
            assert!((lhs - rhs).abs() < 1e-12, "q={q} col={col}");
        }
    }
}

/// `<e_k e_l| U (x) U* (x) U (x) U* |e_i e_j>` for one sampled gate, summing
/// over the dense support of the four-copy basis vectors.
fn sampled_replica_matrix(basis: &ReplicaBasis, u: &faer::Mat<C64>, inputs: &[usize], outputs: &[usize]) -> Vec<C64> {
    let q = basis.q;
    let d = 2 * q;
    let de = basis.d_eff();
    let support: Vec<Vec<([usize; 4], f64)>> = (0..de)
        .map(|i| {
            let v = basis.vector(i);
            (0..v.len())
                .filter(|&k| v[k] != 0.0)
                .map(|k| ([k / (d * d * d), (k / (d * d)) % d, (k / d) % d, k % d], v[k]))
                .collect()
        })
        .collect();
    let pair_support = |p: usize| {
        let (i, j) = (p / de, p % de);
        let mut out = Vec::new();
        for (xi, wi) in &support[i] {
            for (xj, wj) in &support[j] {
                let idx: [usize; 4] = core::array::from_fn(|c| xi[c] + d * xj[c]);
                out.push((idx, wi * wj));
            }
        }
        out
    };
    let ins: Vec<_> = inputs.iter().map(|&p| pair_support(p)).collect();
    let outs: Vec<_> = outputs.iter().map(|&p| pair_support(p)).collect();
    let mut m = Vec::with_capacity(outputs.len() * inputs.len());
    for o in &outs {
        for i in &ins {
            let mut acc = C64::new(0.0, 0.0);
            for (a, wa) in o {
                for (b, wb) in i {
                    acc += u[(a[0], b[0])] * u[(a[1], b[1])].conj() * u[(a[2], b[2])] * u[(a[3], b[3])].conj() * (wa * wb);
                }
            }
            m.push(acc);
        }
    }
    m
}

fn check_gate_against_haar(q: usize, samples: usize, inputs: &[usize], outputs: &[usize]) -> (usize, usize) {
    let e = ReplicaEngine::new(q).unwrap();
    let de = e.basis.d_eff();
    let n = de * de;
    let g2 = |i: usize, j: usize| e.basis.gram[(i / de) * de + j / de] * e.basis.gram[(i % de) * de + j % de];
    let mut rng = rng::stream(7, rng::DOMAIN_GATE_TEST, q as u64);
    let len = inputs.len() * outputs.len();
    let (mut s, mut s2) = (vec![C64::new(0.0, 0.0); len], vec![0.0f64; 2 * len]);
    for _ in 0..samples {
        let u = sample_sector_gate(q, &mut rng).full_matrix();
        let m = sampled_replica_matrix(&e.basis, &u, inputs, outputs);
        for k in 0..len {
            s[k] += m[k];
            s2[2 * k] += m[k].re * m[k].re;
            s2[2 * k + 1] += m[k].im * m[k].im;
        }
    }
    let ns = samples as f64;
    let mut fails = 0;
    for (oi, &o) in outputs.iter().enumerate() {
        for (ii, &i) in inputs.iter().enumerate() {
            let k = oi * inputs.len() + ii;
            let expect: f64 = (0..n).map(|p| g2(o, p) * e.gate.matrix[p * n + i]).sum();
            let mean = s[k] / ns;
            let se_re = ((s2[2 * k] / ns - mean.re * mean.re).max(0.0) / (ns - 1.0)).sqrt();
            let se_im = ((s2[2 * k + 1] / ns - mean.im * mean.im).max(0.0) / (ns - 1.0)).sqrt();
            let ok_re = (mean.re - expect).abs() <= 3.0 * se_re + 1e-12;
            let ok_im = mean.im.abs() <= 3.0 * se_im + 1e-12;
            if !(ok_re && ok_im) {
                fails += 1;
                eprintln!("q={q} out={o} in={i}: mc={mean:.5} expect={expect:.5} se={se_re:.2e}");
            }
        }
    }
    (fails, len)
}

#[test]
fn transfer_gate_matches_haar_monte_carlo_q1() {
    let all: Vec<usize> = (0..36).collect();
    let (fails, total) = check_gate_against_haar(1, 100_000, &all, &all);
    eprintln!("q=1: {fails} of {total} entries outside 3 sigma");
    assert_eq!(fails, 0);
}

#[test]
fn transfer_gate_matches_haar_monte_carlo_q2() {
    let de = 8;
    let ins: Vec<usize> = (0..de * de).step_by(9).collect();
    let outs: Vec<usize> = (0..de * de).collect();
    let (fails, total) = check_gate_against_haar(2, 20_000, &ins, &outs);
    eprintln!("q=2: {fails} of {total} entries outside 3 sigma");
    assert_eq!(fails, 0);
}

#[test]
fn frame_gate_is_an_orthogonal_projector() {
    for q in [1, 2, 3] {
        let e = ReplicaEngine::new(q).unwrap();
        let n = e.frame_gate.dim();
        let t = &e.frame_gate.matrix;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((t[i * n + j] - t[j * n + i]).abs());
                let sq: f64 = (0..n).map(|k| t[i * n + k] * t[k * n + j]).sum();
                worst = worst.max((sq - t[i * n + j]).abs());
            }
        }
        assert!(worst < 1e-10, "q={q}: {worst}");
        let v: Vec<f64> = (0..e.basis.d_eff()).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = e.to_basis(&e.to_frame(&v));
        assert!(v.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

#[test]
fn one_layer_annihilates_off_replica_components() {
    for q in [1, 2] {
        for spec in [ProductStateSpec::ferro(0.7), ProductStateSpec::antiferro(1.1)] {
            let e = ReplicaEngine::new(q).unwrap();
            let c = chain(2, q);
            let init = e.build_initial_replica_state(&spec, &c).unwrap();
            let projected: Vec<f64> = {
                let (a, b) = (&e.to_basis(&init.tensors[0]), &e.to_basis(&init.tensors[1]));
                let de = e.basis.d_eff();
                (0..de * de).map(|p| a[p / de] * b[p % de]).collect()
            };
            let evolved = e.gate.apply(&projected);
            // Exact average of the unprojected state: overlaps of rho0 (x) rho0 with
            // the pair basis, pushed through the invariant projector G2 T G2^{-1}.
            let de = e.basis.d_eff();
            let w0 = local_product_replica(&spec, 0, q);
            let w1 = local_product_replica(&spec, 1, q);
            let o: Vec<f64> = (0..de * de)
                .map(|p| {
                    let d0: f64 = e.basis.vector(p / de).iter().zip(&w0).map(|(a, b)| a * b).sum();
                    let d1: f64 = e.basis.vector(p % de).iter().zip(&w1).map(|(a, b)| a * b).sum();
                    d0 * d1
                })
                .collect();
            // T c only depends on overlaps with span vectors: T = W G2, and G2 c = o.
            let n = de * de;
            let g2 = |i: usize, j: usize| e.basis.gram[(i / de) * de + j / de] * e.basis.gram[(i % de) * de + j % de];
            let go: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g2(i, j) * projected[j]).sum()).collect();
            for k in 0..n {
                assert!((go[k] - o[k]).abs() < 1e-12);
            }
            let id = e.basis.overlaps(&LocalForm::Identity.dense(q));
            let tr: f64 = (0..n).map(|p| (id[p / de] * id[p % de]).re * evolved[p]).sum();
            assert!((tr - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn dense_invariant_projection_matches_gate_q2() {
    // Brute-force the Haar average on the full two-site four-copy space for
    // q = 2 (4^8 entries) via the explicit invariant vectors and compare.
    let q = 2;
    let d = 2 * q;
    let dd = d * d;
    let e = ReplicaEngine::new(q).unwrap();
    let spec = ProductStateSpec::ferro(0.9);
    let sector = |x: usize| usize::from(x % d < q) + usize::from(x / d < q);
    let w0 = local_product_replica(&spec, 0, q);
    let w1 = local_product_replica(&spec, 1, q);
    let idx1 = |k: usize| [k / (d * d * d), (k / (d * d)) % d, (k / d) % d, k % d];
    let mut w = vec![0.0; dd * dd * dd * dd];
    for k0 in 0..w0.len() {
        if w0[k0] == 0.0 {
            continue;
        }
        for k1 in 0..w1.len() {
            if w1[k1] == 0.0 {
                continue;
            }
            let (a, b) = (idx1(k0), idx1(k1));
            let x: [usize; 4] = core::array::from_fn(|c| a[c] + d * b[c]);
            w[((x[0] * dd + x[1]) * dd + x[2]) * dd + x[3]] = w0[k0] * w1[k1];
        }
    }
    let mut avg = vec![0.0; w.len()];
    for s1 in 0..3 {
        for s2 in 0..3 {
            let xs: Vec<usize> = (0..dd).filter(|&x| sector(x) == s1).collect();
            let ys: Vec<usize> = (0..dd).filter(|&y| sector(y) == s2).collect();
            let at = |a: usize, b: usize, c: usize, f: usize| ((a * dd + b) * dd + c) * dd + f;
            let va: Vec<usize> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| at(x, x, y, y))).collect();
            let vb: Vec<usize> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| at(x, y, y, x))).collect();
            let dot = |v: &[usize]| v.iter().map(|&k| w[k]).sum::<f64>();
            let overlap = va.iter().filter(|k| vb.contains(k)).count() as f64;
            let g = [[va.len() as f64, overlap], [overlap, vb.len() as f64]];
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let o = [dot(&va), dot(&vb)];
            let c = if det.abs() > 1e-9 {
                [(g[1][1] * o[0] - g[0][1] * o[1]) / det, (g[0][0] * o[1] - g[1][0] * o[0]) / det]
            } else {
                [o[0] / (2.0 * g[0][0]), o[0] / (2.0 * g[0][0])]
            };
            for &k in &va {
                avg[k] += c[0];
            }
            for &k in &vb {
                avg[k] += c[1];
            }
        }
    }
    let init = e.build_initial_replica_state(&spec, &chain(2, q)).unwrap();
    let de = e.basis.d_eff();
    let (c0, c1) = (e.to_basis(&init.tensors[0]), e.to_basis(&init.tensors[1]));
    let cin: Vec<f64> = (0..de * de).map(|p| c0[p / de] * c1[p % de]).collect();
    let cout = e.gate.apply(&cin);
    for (form, name) in [(LocalForm::Identity, "id"), (LocalForm::TwistedSwap(0.0), "swap"), (LocalForm::TwistedSwap(1.3), "twist")] {
        let f = form.dense(q);
        let fo = e.basis.overlaps(&f);
        let tn: C64 = (0..de * de).map(|p| fo[p / de] * fo[p % de] * cout[p]).sum();
        let mut dense = C64::new(0.0, 0.0);
        for (k, v) in avg.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let x = [k / (dd * dd * dd), (k / (dd * dd)) % dd, (k / dd) % dd, k % dd];
            let lo: [usize; 4] = core::array::from_fn(|c| x[c] % d);
            let hi: [usize; 4] = core::array::from_fn(|c| x[c] / d);
            let fl = f[((lo[0] * d + lo[1]) * d + lo[2]) * d + lo[3]];
            let fh = f[((hi[0] * d + hi[1]) * d + hi[2]) * d + hi[3]];
            dense += fl * fh * *v;
        }
        assert!((tn - dense).norm() < 1e-12, "{name}: tn={tn} dense={dense}");
    }
}

#[test]
fn initial_state_dressed_components() {
    for q in [1, 2] {
        let e = ReplicaEngine::new(q).unwrap();
        let dressed = e.basis.dressed_overlaps();
        for theta in [0.0, 0.4, core::f64::consts::FRAC_PI_2] {
            for spec in [ProductStateSpec::ferro(theta), ProductStateSpec::antiferro(theta)] {
                let mps = e.build_initial_replica_state(&spec, &chain(4, q)).unwrap();
                for site in 0..4 {
                    let cg = e.basis.apply_gram(&e.to_basis(&mps.tensors[site]));
                    let sign = if spec.alpha(site) == 1 { -1.0 } else { 1.0 };
                    for m in 0..2 {
                        for a in 0..2 {
                            for c in 0..2 {
                                let comp: f64 = e.basis.apply_gram_inv(&cg).iter().zip(&dressed[m][a][c]).map(|(x, y)| x * y).sum();
                                let expect = (sign * theta.cos()).powi((a + c) as i32);
                                assert!((comp - expect).abs() < 1e-12, "q={q} theta={theta} site={site} m={m} a={a} c={c}: {comp} vs {expect}");
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn fourier_form_dressed_components() {
    // Riesz vector of the twisted swap, expanded on sum_{r,b} r^a b^c |-,r,b>:
    // i^(c-a) sin(k)^(a+c) cos(k)^(2-a-c) with k = phi/2.
    let q = 2;
    let e = ReplicaEngine::new(q).unwrap();
    for phi in [0.0, 0.9, core::f64::consts::PI, 4.0] {
        let riesz = e.basis.overlaps(&LocalForm::TwistedSwap(phi).dense(q));
        let re: Vec<f64> = riesz.iter().map(|z| z.re).collect();
        let im: Vec<f64> = riesz.iter().map(|z| z.im).collect();
        let (cr, ci) = (e.basis.apply_gram_inv(&re), e.basis.apply_gram_inv(&im));
        let k = phi / 2.0;
        for a in 0..2usize {
            for c in 0..2usize {
                let mut z = C64::new(0.0, 0.0);
                for (idx, l) in e.basis.labels.iter().enumerate() {
                    if l.mu != -1 {
                        continue;
                    }
                    let w = f64::from(l.r).powi(a as i32) * f64::from(l.b).powi(c as i32) / 4.0;
                    z += C64::new(cr[idx], ci[idx]) * w;
                }
                for (idx, l) in e.basis.labels.iter().enumerate() {
                    if l.mu == 1 {
                        assert!(cr[idx].abs() < 1e-12 && ci[idx].abs() < 1e-12);
                    }
                }
                let phase = C64::new(0.0, 1.0).powi(c as i32 - a as i32);
                let expect = phase * k.sin().powi((a + c) as i32) * k.cos().powi(2 - (a + c) as i32);
                assert!((z - expect).norm() < 1e-12, "phi={phi} a={a} c={c}: {z} vs {expect}");
            }
        }
    }
}

#[test]
fn fourier_zero_is_swap() {
    let c = chain(6, 1);
    let a = SiteRange::new(2, 2);
    assert_eq!(build_fourier_boundary(&a, 0.0, &c), build_swap_boundary(&a, &c));
}

#[test]
fn trace_preservation_and_global_purity() {
    for q in [1, 2] {
        let c = chain(6, q);
        let e = ReplicaEngine::new(q).unwrap();
        for spec in [ProductStateSpec::ferro(0.8), ProductStateSpec::antiferro(0.5)] {
            let init = e.build_initial_replica_state(&spec, &c).unwrap();
            for t in 0..4 {
                let policy = TruncationPolicy::default();
                let tr = e.contract(&identity_boundary(&c), &c, t, &init, &policy).unwrap();
                let empty = e.contract(&build_swap_boundary(&SiteRange::new(0, 0), &c), &c, t, &init, &policy).unwrap();
                let full = e.contract(&build_swap_boundary(&SiteRange::new(0, 6), &c), &c, t, &init, &policy).unwrap();
                assert!((tr - 1.0).abs() < 1e-8, "q={q} t={t} tr={tr}");
                assert!((empty - 1.0).abs() < 1e-8);
                assert!((full - 1.0).abs() < 1e-8, "q={q} t={t} global purity {full}");
            }
        }
    }
}

#[test]
fn untruncated_contraction_preserves_trace_exactly() {
    for q in [1, 2] {
        let c = chain(6, q);
        let e = ReplicaEngine::new(q).unwrap();
        let policy = TruncationPolicy::with_cutoff(0.0);
        for spec in [ProductStateSpec::ferro(0.8), ProductStateSpec::antiferro(0.5)] {
            let init = e.build_initial_replica_state(&spec, &c).unwrap();
            for t in 0..4 {
                let tr = e.contract(&identity_boundary(&c), &c, t, &init, &policy).unwrap();
                assert!((tr - 1.0).abs() < 1e-12, "q={q} t={t} tr={tr}");
            }
        }
    }
}

#[test]
fn t0_values() {
    let c = chain(10, 1);
    let e = ReplicaEngine::new(1).unwrap();
    let spec = ProductStateSpec::ferro(1.2);
    let init = e.build_initial_replica_state(&spec, &c).unwrap();
    let a = SiteRange::new(3, 4);
    let p = e.contract(&build_swap_boundary(&a, &c), &c, 0, &init, &TruncationPolicy::default()).unwrap();
    assert!((p - 1.0).abs() < 1e-12);
    let phis = moment_set(4);
    let paq: f64 = phis.iter().map(|&f| e.contract(&build_fourier_boundary(&a, f, &c), &c, 0, &init, &TruncationPolicy::default()).unwrap()).sum::<f64>() / 5.0;
    assert!((paq - binomial_decohered_purity(4, 1.2)).abs() < 1e-12);
}

#[test]
fn tn_t0_matches_binomial_and_enumeration() {
    for &n_a in &[2usize, 4, 8, 16, 32] {
        for theta in [core::f64::consts::FRAC_PI_6, core::f64::consts::FRAC_PI_3, core::f64::consts::FRAC_PI_2] {
            let c = chain(n_a + 2, 1);
            let a = SiteRange::new(1, n_a);
            let run = annealed_asymmetry_tn(&ProductStateSpec::ferro(theta), &c, &a, 0, &TruncationPolicy::default()).unwrap();
            let exact = binomial_decohered_purity(n_a, theta);
            assert!((run.decohered.values[0] - exact).abs() < 1e-8, "N_A={n_a}");
            assert!((run.asymmetry.values[0] + exact.ln()).abs() < 1e-6);
            if n_a <= 16 {
                let en = product_state_decohered_purity(&ProductStateSpec::ferro(theta), &a, c.n, 1);
                assert!((en - exact).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn splus_t0_uses_the_unprojected_state() {
    for q in [1, 2] {
        let c = chain(6, q);
        let spec = ProductStateSpec::ferro(0.6);
        let (tr, _) = splus_trace_tn(&spec, &c, 3, 2, &TruncationPolicy::default()).unwrap();
        assert!((tr.values[0] - 0.6f64.sin().powi(2) / 2.0).abs() < 1e-12, "q={q}");
        assert!(tr.values[1] < tr.values[0] && tr.values[1] > 0.0);
    }
}

#[test]
fn theta_zero_has_no_asymmetry() {
    let c = chain(12, 1);
    let run = annealed_asymmetry_tn(&ProductStateSpec::ferro(0.0), &c, &SiteRange::new(4, 4), 6, &TruncationPolicy::default()).unwrap();
    for v in &run.asymmetry.values {
        assert!(v.abs() < 1e-8);
    }
}

#[test]
fn open_chains_only() {
    let c = ChainSpec::new(6, 1, Boundary::Periodic, 0, 0).unwrap();
    assert!(annealed_asymmetry_tn(&ProductStateSpec::ferro(0.3), &c, &SiteRange::new(1, 2), 1, &TruncationPolicy::default()).is_err());
}

#[test]
fn bond_cap_reports_the_layer() {
    let c = chain(16, 1);
    let policy = TruncationPolicy { cutoff: 1e-15, max_bond: Some(4) };
    match annealed_asymmetry_tn(&ProductStateSpec::ferro(0.9), &c, &SiteRange::new(6, 4), 8, &policy) {
        Err(mpemba_core::Error::BondOverflow { layer, cap, .. }) => {
            assert!(layer >= 1);
            assert_eq!(cap, 4);
        }
        other => panic!("expected overflow, got {other:?}"),
    }
}

fn synthetic(values: Vec<f64>, theta: f64) -> AsymmetryTrace {
    let mut t = AsymmetryTrace::new(TraceMeta {
        theta,
        n_sites: 0,
        n_a: 0,
        q: 1,
        state: mpemba_core::qudit_sim::ProductKind::TiltedFerro,
        estimator: Estimator::Prediction,
        observable: Observable::Asymmetry,
        renyi: 2.0,
    });
    for (k, v) in values.into_iter().enumerate() {
        t.push(k, v, 0.0);
    }
    t
}

#[test]
fn crossing_time_synthetic() {
    let a = synthetic((0..10).map(|t| (-(t as f64) / 2.0).exp()).collect(), 0.1);
    let b = synthetic((0..10).map(|t| 2.0 * (-(t as f64)).exp()).collect(), 0.2);
    let tm = mpemba_crossing_time(&a, &b).unwrap().unwrap();
    assert!((tm - 2.0 * 2f64.ln()).abs() < 1e-12);
    let p = synthetic((0..10).map(|t| (-(t as f64)).exp()).collect(), 0.1);
    let r = synthetic((0..10).map(|t| 2.0 * (-(t as f64)).exp()).collect(), 0.2);
    assert_eq!(mpemba_crossing_time(&p, &r).unwrap(), None);
    let short = synthetic(vec![1.0, 2.0], 0.2);
    assert!(mpemba_crossing_time(&p, &short).is_err());
}
