use mpemba::config::{parse_flat, Engine, ExperimentConfig, Overrides};
use mpemba::HarnessError;

fn pairs(sets: &[&str]) -> Vec<(String, String)> {
    sets.iter().map(|s| {
        let (k, v) = s.split_once('=').unwrap();
        (k.to_string(), v.to_string())
    }).collect()
}

fn rejected_fields(engine: Engine, sets: &[&str]) -> Vec<String> {
    match ExperimentConfig::from_pairs(engine, &pairs(sets)) {
        Err(HarnessError::Validation(errs)) => errs.into_iter().map(|e| e.field).collect(),
        Err(e) => panic!("{sets:?}: unexpected error {e}"),
        Ok(_) => Vec::new(),
    }
}

#[test]
fn physically_inconsistent_configs_are_rejected() {
    let table: &[(Engine, &[&str], &str)] = &[
        (Engine::Exact, &["state=antiferro", "n=7"], "state"),
        (Engine::Tn, &["state=antiferro", "n=9"], "state"),
        (Engine::Opspread, &["state=antiferro", "n=11"], "state"),
        (Engine::Tn, &["renyi=3"], "renyi"),
        (Engine::Opspread, &["renyi=1"], "renyi"),
        (Engine::Exact, &["n=29"], "n"),
        (Engine::Exact, &["n=15", "q=2"], "n"),
        (Engine::Opspread, &["estimator=exact", "n=11", "q=3"], "n"),
        (Engine::Tn, &["boundary=periodic"], "boundary"),
        (Engine::Exact, &["theta=0.5,4"], "theta"),
        (Engine::Ssep, &["theta=1.6"], "theta"),
        (Engine::Exact, &["n_a=13"], "n_a"),
        (Engine::Tn, &["n_a=4", "a_start=10"], "n_a"),
        (Engine::Exact, &["realizations=1"], "realizations"),
        (Engine::Exact, &["renyi=0"], "renyi"),
        (Engine::Opspread, &["site=12"], "site"),
        (Engine::Ssep, &["n=3"], "n"),
        (Engine::Ssep, &["trajectories=1"], "trajectories"),
        (Engine::Ssep, &["stride=20", "t_max=10"], "stride"),
        (Engine::Mft, &["order=5"], "order"),
        (Engine::Mft, &["alpha=1.0"], "diffusion"),
        (Engine::Tn, &["cutoff=-1"], "cutoff"),
        (Engine::Tn, &["max_bond=0"], "max_bond"),
        (Engine::Tn, &["engine=exact"], "engine"),
        (Engine::Tn, &["color=red"], "color"),
        (Engine::Exact, &["n=abc"], "n"),
        (Engine::Exact, &["theta=0.1,x"], "theta"),
        (Engine::Exact, &["mode=both_ways"], "mode"),
    ];
    for (engine, sets, field) in table {
        let f = rejected_fields(*engine, sets);
        assert!(f.iter().any(|x| x == field), "{} {sets:?}: rejected {f:?}, expected {field}", engine.as_str());
    }
}

#[test]
fn consistent_configs_are_accepted() {
    let table: &[(Engine, &[&str])] = &[
        (Engine::Exact, &["n=14", "q=1"]),
        (Engine::Exact, &["n=9", "q=2", "state=ferro"]),
        (Engine::Tn, &["n=512", "n_a=16", "state=antiferro"]),
        (Engine::Exact, &["renyi=3", "state=antiferro", "n=8"]),
        (Engine::Ssep, &["n=4000", "theta=0.1,0.2,0.3", "t_max=400"]),
        (Engine::Mft, &["n=7", "state=antiferro", "alpha=1", "diffusion=1"]),
        (Engine::Opspread, &["n=24", "site=3"]),
        (Engine::Exact, &["n=28", "q=1"]),
    ];
    for (engine, sets) in table {
        assert!(rejected_fields(*engine, sets).is_empty(), "{sets:?}");
    }
}

#[test]
fn every_error_is_reported_with_its_field() {
    let f = rejected_fields(Engine::Tn, &["renyi=3", "boundary=periodic", "state=antiferro", "n=9", "bogus=1"]);
    for want in ["renyi", "boundary", "state", "bogus"] {
        assert!(f.iter().any(|x| x == want), "missing {want} in {f:?}");
    }
}

#[test]
fn layering_of_sources() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# sweep\nengine = tn\nn = 32   # sites\ntheta = 0.2, 0.4\nseed=5\n\nt_max=7\n").unwrap();
    let ov = Overrides { file: Some(path), sets: vec!["n=40".into()], seed: Some(9), out: Some("elsewhere".into()) };
    let c = ExperimentConfig::load(Engine::Tn, &ov).unwrap();
    assert_eq!(c.n, 40);
    assert_eq!(c.thetas, vec![0.2, 0.4]);
    assert_eq!(c.seed, 9);
    assert_eq!(c.t_max, 7);
    assert_eq!(c.out_dir(), std::path::Path::new("elsewhere"));
    assert!(c.entries().iter().any(|(k, v)| k == "n" && v == "40"));
    assert_eq!(c.subsystem(3).start, (40 - 3) / 2);
    assert_eq!(c.splus_site(), 20);
}

#[test]
fn flat_parser() {
    let p = parse_flat("a=1\n  # note\nb = x=y\n", "f").unwrap();
    assert_eq!(p, vec![("a".into(), "1".into()), ("b".into(), "x=y".into())]);
    assert!(parse_flat("novalue\n", "f").is_err());
    assert!(parse_flat("=3\n", "f").is_err());
}
