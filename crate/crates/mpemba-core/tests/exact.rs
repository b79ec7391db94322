use mpemba_core::asymmetry_exact::*;
use mpemba_core::qudit_sim::*;
use mpemba_core::rng;
use mpemba_core::Complex64 as C64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn binomial_decohered_purity(n_a: usize, theta: f64) -> f64 {
    let p = (theta / 2.0).cos().powi(2);
    (0..=n_a).map(|k| (binom(n_a, k) * p.powi(k as i32) * (1.0 - p).powi((n_a - k) as i32)).powi(2)).sum()
}

fn open(n: usize, q: usize, depth: usize, seed: u64) -> ChainSpec {
    ChainSpec::new(n, q, Boundary::Open, depth, seed).unwrap()
}

#[test]
fn haar_blocks_are_unitary_with_haar_moments() {
    let mut rng = rng::stream(11, rng::DOMAIN_GATE_TEST, 0);
    let samples = 20_000;
    for q in [1, 2] {
        let dims = PairLayout::new(q).sector_dims();
        let mut m2 = [0.0f64; 3];
        let mut m4 = [0.0f64; 3];
        let mut m4sq = [0.0f64; 3];
        for _ in 0..samples {
            let g = sample_sector_gate(q, &mut rng);
            for s in 0..3 {
                let u = &g.blocks[s];
                let n = u.nrows();
                let mut err = 0.0f64;
                for i in 0..n {
                    for j in 0..n {
                        let dot: C64 = (0..n).map(|k| u[(k, i)].conj() * u[(k, j)]).sum();
                        let e = if i == j { dot - 1.0 } else { dot };
                        err = err.max(e.norm());
                    }
                }
                assert!(err < 1e-12);
                m2[s] += u[(0, n - 1)].norm_sqr();
                let f = u[(0, 0)].norm_sqr().powi(2);
                m4[s] += f;
                m4sq[s] += f * f;
            }
        }
        for s in 0..3 {
            let d = dims[s] as f64;
            let ns = samples as f64;
            let mean4 = m4[s] / ns;
            let se4 = ((m4sq[s] / ns - mean4 * mean4) / ns).sqrt();
            assert!((mean4 - 2.0 / (d * (d + 1.0))).abs() < 3.0 * se4 + 1e-15, "q={q} s={s}");
            // |u_ij|^2 ~ Beta(1, d-1)
            let sd2 = ((d - 1.0) / (d * d * (d + 1.0)) / ns).sqrt();
            assert!((m2[s] / ns - 1.0 / d).abs() < 3.0 * sd2 + 1e-15, "q={q} s={s}");
        }
    }
    assert_eq!(PairLayout::new(2).sector_dims(), [4, 8, 4]);
}

#[test]
fn product_state_basics() {
    for q in [1, 2] {
        let c = open(6, q, 0, 0);
        for spec in [ProductStateSpec::ferro(0.7), ProductStateSpec::antiferro(0.7)] {
            let st = tilted_product_state(&spec, &c).unwrap();
            assert!((st.norm() - 1.0).abs() < 1e-12);
            let z = st.z_profile();
            for (j, zj) in z.iter().enumerate() {
                let sign = if spec.alpha(j) == 1 { -1.0 } else { 1.0 };
                assert!((zj - sign * 0.7f64.cos()).abs() < 1e-12);
            }
            let sp = splus_expectation(&st, 2).unwrap();
            assert!((sp.norm_sqr() - 0.7f64.sin().powi(2) / 2.0).abs() < 1e-12);
        }
    }
    assert!(matches!(tilted_product_state(&ProductStateSpec::antiferro(0.3), &open(5, 1, 0, 0)), Err(mpemba_core::Error::OddAntiferro(5))));
    let big = open(20, 2, 0, 0);
    assert!(matches!(tilted_product_state(&ProductStateSpec::ferro(0.3), &big), Err(mpemba_core::Error::MemoryCap { .. })));
}

#[test]
fn theta_zero_is_invariant_and_charge_is_conserved() {
    for boundary in [Boundary::Open, Boundary::Periodic] {
        for q in [1, 2] {
            let c = ChainSpec::new(6, q, boundary, 0, 3).unwrap();
            let mut rng = rng::stream(3, rng::DOMAIN_CIRCUIT, q as u64);
            let mut zero = tilted_product_state(&ProductStateSpec::ferro(0.0), &c).unwrap();
            let before = zero.amps.clone();
            evolve(&mut zero, 3, &mut rng);
            if q == 1 {
                let overlap: C64 = before.iter().zip(&zero.amps).map(|(a, b)| a.conj() * b).sum();
                assert!((overlap.norm() - 1.0).abs() < 1e-12);
            }
            // colors scramble inside the polarized sector, spins stay up
            assert!(zero.z_profile().iter().all(|z| (z - 1.0).abs() < 1e-12));
            let rho = reduced_density_matrix(&zero, &SiteRange::new(1, 3)).unwrap();
            assert!(entanglement_asymmetry(&rho, 2.0).unwrap().abs() < 1e-8);
        }
        let c = ChainSpec::new(6, 2, boundary, 0, 3).unwrap();
        let mut rng = rng::stream(3, rng::DOMAIN_CIRCUIT, 0);
        let mut st = tilted_product_state(&ProductStateSpec::ferro(1.1), &c).unwrap();
        let q0 = st.charge_expectation();
        evolve(&mut st, 4, &mut rng);
        assert!((st.charge_expectation() - q0).abs() < 1e-12);
        assert!((st.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn density_matrix_invariants() {
    let c = open(6, 1, 0, 0);
    let spec = ProductStateSpec::ferro(0.9);
    let mut st = tilted_product_state(&spec, &c).unwrap();
    let mut rng = rng::stream(5, rng::DOMAIN_CIRCUIT, 0);
    evolve(&mut st, 3, &mut rng);
    let a = SiteRange::new(2, 3);
    let rho = reduced_density_matrix(&st, &a).unwrap();
    assert!((rho.trace() - 1.0).abs() < 1e-12);
    assert!(rho.hermiticity_error() < 1e-12);
    assert!(rho.eigenvalues().unwrap().iter().all(|&l| l > -1e-12));
    let rq = charge_decohere(&rho);
    assert!(rq.commutator_with_charge() < 1e-14);
    assert!((rq.trace() - 1.0).abs() < 1e-12);
    let once = charge_decohere(&rq);
    let mut diff = 0.0f64;
    for i in 0..rq.dim() {
        for j in 0..rq.dim() {
            diff = diff.max((once.matrix[(i, j)] - rq.matrix[(i, j)]).norm());
        }
    }
    assert!(diff < 1e-15);
    for n in [0.5, 2.0, 3.0] {
        let da = entanglement_asymmetry(&rho, n).unwrap();
        assert!(da >= -1e-12, "n={n}: {da}");
    }
    let (p, pq) = charge_resolved_traces(&st, &a, 2.0).unwrap();
    assert!((p - rho.purity()).abs() < 1e-12);
    assert!((pq - rq.purity()).abs() < 1e-12);
    assert!(pq <= p + 1e-12);
    assert!(renyi_entropy(&rho, 1.0).is_err());
}

#[test]
fn t0_decohered_purity_matches_binomial() {
    for &n_a in &[2usize, 4, 8] {
        for theta in [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2] {
            let c = open(n_a + 2, 1, 0, 0);
            let a = SiteRange::new(1, n_a);
            let spec = ProductStateSpec::ferro(theta);
            let st = tilted_product_state(&spec, &c).unwrap();
            let rho = reduced_density_matrix(&st, &a).unwrap();
            let pq = charge_decohere(&rho).purity();
            let expect = binomial_decohered_purity(n_a, theta);
            assert!((pq - expect).abs() < 1e-8);
            let (_, via_traces) = charge_resolved_traces(&st, &a, 2.0).unwrap();
            assert!((via_traces - expect).abs() < 1e-8);
            assert!((product_state_decohered_purity(&spec, &a, c.n, 1) - expect).abs() < 1e-12);
            assert!((entanglement_asymmetry(&rho, 2.0).unwrap() + expect.ln()).abs() < 1e-8);
        }
    }
}

#[test]
fn asymmetry_vanishes_at_theta_zero() {
    let c = open(4, 2, 0, 0);
    let st = tilted_product_state(&ProductStateSpec::ferro(0.0), &c).unwrap();
    let rho = reduced_density_matrix(&st, &SiteRange::new(1, 2)).unwrap();
    assert!(entanglement_asymmetry(&rho, 2.0).unwrap().abs() < 1e-12);
}

#[test]
fn ensemble_is_deterministic_and_annealed_t0_exact() {
    let spec = EnsembleSpec {
        chain: open(6, 1, 3, 42),
        states: vec![ProductStateSpec::ferro(0.4), ProductStateSpec::ferro(1.0)],
        a: SiteRange::new(2, 2),
        t_max: 3,
        renyi: 2.0,
    };
    let a1 = ensemble_average(&spec, 20, AverageMode::Annealed).unwrap();
    let a2 = ensemble_average(&spec, 20, AverageMode::Annealed).unwrap();
    assert_eq!(a1, a2);
    let quenched = ensemble_average(&spec, 20, AverageMode::Quenched).unwrap();
    for (k, s) in spec.states.iter().enumerate() {
        let expect = -binomial_decohered_purity(2, s.theta).ln();
        assert!((a1[k].values[0] - expect).abs() < 1e-10);
        assert!((quenched[k].values[0] - expect).abs() < 1e-10);
        assert_eq!(a1[k].times, vec![0, 1, 2, 3]);
    }
    assert!(ensemble_average(&spec, 1, AverageMode::Annealed).is_err());
}

#[test]
fn periodic_subsystem_wraps() {
    let c = ChainSpec::new(6, 1, Boundary::Periodic, 2, 1).unwrap();
    let a = SiteRange::new(5, 2);
    assert_eq!(a.sites(6), vec![5, 0]);
    let mut st = tilted_product_state(&ProductStateSpec::ferro(0.8), &c).unwrap();
    let mut rng = rng::stream(1, rng::DOMAIN_CIRCUIT, 0);
    evolve(&mut st, 2, &mut rng);
    let rho = reduced_density_matrix(&st, &a).unwrap();
    assert!((rho.trace() - 1.0).abs() < 1e-12);
    assert!(SiteRange::new(5, 2).check(&open(6, 1, 0, 0)).is_err());
}

#[test]
fn diffusion_constant_q1_is_stable() {
    let c = open(24, 1, 10, 9);
    let d = estimate_diffusion_constant(&c, 400).unwrap();
    assert!(d.d > 0.1 && d.d < 2.0, "D = {}", d.d);
    assert!(d.r2 > 0.9);
    for m in &d.total_charge {
        assert!((m - 1.0).abs() < 1e-10);
    }
    let small = open(8, 2, 4, 9);
    let d2 = estimate_diffusion_constant(&small, 100).unwrap();
    assert!(d2.d > 0.0);
    assert!(estimate_diffusion_constant(&c, 10).is_err());
}
