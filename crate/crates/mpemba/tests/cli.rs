use mpemba::output::{body_bytes, read_table, MANIFEST};
use std::path::Path;
use std::process::Command;

fn mpemba(args: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_mpemba")).args(args).output().unwrap();
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stdout).into_owned(), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn with_sets<'a>(base: &[&'a str], sets: &[&'a str]) -> Vec<&'a str> {
    let mut v = base.to_vec();
    for s in sets {
        v.push("--set");
        v.push(s);
    }
    v
}

fn bodies(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let (_, _, rows) = read_table(&dir.join(MANIFEST)).unwrap();
    rows.iter().map(|r| (r[0].clone(), body_bytes(&dir.join(&r[0])).unwrap())).collect()
}

#[test]
fn same_seed_gives_identical_bodies_for_any_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: &[(&str, &[&str])] = &[
        ("exact", &["n=6", "n_a=2,3", "t_max=3", "realizations=40"]),
        ("tn", &["n=10", "n_a=2", "t_max=3", "cutoff=1e-12"]),
        ("ssep", &["n=100", "t_max=20", "stride=5", "trajectories=200", "theta=0.3"]),
        ("opspread", &["n=6", "t_max=9", "estimator=exact", "realizations=20"]),
    ];
    for (k, (engine, sets)) in runs.iter().enumerate() {
        let mut out = Vec::new();
        for (tag, jobs) in [("a", "1"), ("b", "3")] {
            let dir = tmp.path().join(format!("{k}{tag}"));
            let d = dir.to_str().unwrap().to_string();
            let args = with_sets(&[engine, "--seed", "11", "--jobs", jobs, "--out", &d], sets);
            let (code, _, err) = mpemba(&args);
            assert_eq!(code, 0, "{engine}: {err}");
            out.push(bodies(&dir));
        }
        assert!(!out[0].is_empty());
        assert_eq!(out[0], out[1], "{engine}");
    }
    let d = tmp.path().join("other");
    let (code, _, _) = mpemba(&with_sets(&["exact", "--seed", "12", "--out", d.to_str().unwrap()], runs[0].1));
    assert_eq!(code, 0);
    assert_ne!(bodies(&d), bodies(&tmp.path().join("0a")));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tmp.path().join("o");
    let o = o.to_str().unwrap();
    let (code, _, err) = mpemba(&["tn", "--out", o, "--set", "renyi=3"]);
    assert_eq!(code, 1);
    assert!(err.contains("renyi"), "{err}");
    assert_eq!(mpemba(&["exact", "--out", o, "--set", "n=30"]).0, 1);
    assert_eq!(mpemba(&["exact", "--out", o, "--set", "state=antiferro", "--set", "n=5"]).0, 1);
    assert_eq!(mpemba(&["tn", "--jobs", "0", "--out", o]).0, 1);
    assert_eq!(mpemba(&["exact", "--config", "/nonexistent/run.cfg"]).0, 1);
    assert_eq!(mpemba(&["frobnicate"]).0, 1);
    assert_eq!(mpemba(&["tn", "--set", "noequals"]).0, 1);
    // bond cap exceeded while running
    let (code, _, err) = mpemba(&["tn", "--out", o, "--set", "max_bond=2", "--set", "n=10", "--set", "t_max=4"]);
    assert_eq!(code, 2, "{err}");
    assert!(!Path::new(o).join(MANIFEST).exists());
    // output directory blocked by a file
    let blocked = tmp.path().join("file");
    std::fs::write(&blocked, "x").unwrap();
    assert_eq!(mpemba(&["mft", "--out", blocked.to_str().unwrap()]).0, 2);
    assert_eq!(mpemba(&["--help"]).0, 0);
    assert_eq!(mpemba(&["accept", "--only", "nonsense"]).0, 1);
    let (code, out, _) = mpemba(&["accept", "--list"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 9);
    assert_eq!(mpemba::HarnessError::Acceptance(1).exit_code(), 3);
}

#[test]
fn config_file_plus_overrides_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.cfg");
    std::fs::write(&cfg, "engine=tn\nn=24\nn_a=4\ntheta=0.5,1.0\nt_max=16\ncutoff=1e-9\n").unwrap();
    let out = tmp.path().join("tn");
    let (code, stdout, err) = mpemba(&["tn", "--config", cfg.to_str().unwrap(), "--set", "n_a=4,6", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("wrote 13 files"), "{stdout}");
    let (h, _, _) = read_table(&out.join("tn_asymmetry_annealed_tn_theta1_na6.csv")).unwrap();
    assert_eq!(h["config.n_a"], "4,6");
    assert_eq!(h["config.cutoff"], "1e-9");
    let files: Vec<String> = ["0.5", "1"].iter().flat_map(|t| ["4", "6"].map(|n| out.join(format!("tn_asymmetry_annealed_tn_theta{t}_na{n}.csv")).display().to_string())).collect();
    let rep = tmp.path().join("rep");
    let mut args = vec!["compare", "--out", rep.to_str().unwrap()];
    args.extend(files.iter().map(String::as_str));
    let (code, text, err) = mpemba(&args);
    assert_eq!(code, 0, "{err}");
    assert_eq!(text.lines().filter(|l| l.contains("theta 0.5 vs 1")).count(), 2, "{text}");
    let (_, cols, rows) = read_table(&rep.join("compare_crossings.csv")).unwrap();
    assert_eq!(cols[5], "t_m");
    assert_eq!(rows.len(), 2);
    let short = tmp.path().join("short");
    mpemba(&["tn", "--config", cfg.to_str().unwrap(), "--set", "t_max=5", "--out", short.to_str().unwrap()]);
    let (code, _, _) = mpemba(&["compare", "--out", rep.to_str().unwrap(), &files[0], short.join("tn_asymmetry_annealed_tn_theta1_na4.csv").to_str().unwrap()]);
    assert_eq!(code, 1);
}
