use mpemba::config::{Engine, ExperimentConfig};
use mpemba::engines::splus_traces;

fn cfg(sets: &[(&str, &str)]) -> ExperimentConfig {
    let p: Vec<(String, String)> = sets.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    ExperimentConfig::from_pairs(Engine::Opspread, &p).unwrap()
}

#[test]
fn statevector_splus_average_agrees_with_the_replica_network() {
    let base = [("n", "6"), ("theta", "0.6,1.2"), ("t_max", "6"), ("seed", "3")];
    let tn = splus_traces(&cfg(&[&base[..], &[("estimator", "tn"), ("cutoff", "0")]].concat())).unwrap();
    let ex = splus_traces(&cfg(&[&base[..], &[("estimator", "exact"), ("realizations", "4000")]].concat())).unwrap();
    for ((a, _), (b, _)) in tn.iter().zip(&ex) {
        assert_eq!(a.times, b.times);
        assert!((a.values[0] - b.values[0]).abs() < 1e-12);
        for k in 1..a.len() {
            let tol = 5.0 * b.errors[k] + 1e-12;
            assert!((a.values[k] - b.values[k]).abs() <= tol, "theta {} t={k}: tn {} exact {} ± {}", a.meta.theta, a.values[k], b.values[k], b.errors[k]);
        }
    }
}
