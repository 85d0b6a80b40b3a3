use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sr_lattice::experiments::pair_counterexample;
use sr_lattice::linalg::{exact_determinant, reconstruction_error};
use sr_lattice::random::{dual_gaussian_basis, stream_rng};
use sr_lattice::{Basis, UnimodularTransform};

fn srlat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srlat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn reduce(dir: &Path, input: &Basis, algo: &str, extra: &[&str], out_name: &str) -> (Output, std::path::PathBuf) {
    let inp = dir.join(format!("{out_name}.in"));
    fs::write(&inp, input.to_text()).unwrap();
    let out = dir.join(out_name);
    let mut args = vec!["reduce", "--in", path_str(&inp), "--algo", algo, "--out", path_str(&out)];
    args.extend_from_slice(extra);
    (srlat(&args), out)
}

#[test]
fn identity_is_unchanged_by_every_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    for algo in ["lll", "seysen", "sr-pair", "sr-hash", "sr-cvp", "greedy"] {
        let (o, out) = reduce(dir.path(), &Basis::identity(4), algo, &[], algo);
        assert!(o.status.success(), "{algo}: {}", String::from_utf8_lossy(&o.stderr));
        let b: Basis = fs::read_to_string(&out).unwrap().parse().unwrap();
        assert_eq!(b, Basis::identity(4));
        let u: UnimodularTransform = fs::read_to_string(dir.path().join(format!("{algo}.unimodular")))
            .unwrap()
            .parse()
            .unwrap();
        assert!(u.is_identity());
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{algo}.report.json"))).unwrap()).unwrap();
        assert_eq!(report["accepted_updates"], 0);
        for field in [
            "accepted_updates",
            "ineffective_attempts",
            "cvp_calls",
            "vector_comparisons",
            "od_before",
            "od_after",
            "wall_rounds",
        ] {
            assert!(report.get(field).is_some(), "{field}");
        }
    }
}

#[test]
fn counterexample_file_with_sr_cvp() {
    let dir = tempfile::tempdir().unwrap();
    let a = pair_counterexample(std::f64::consts::FRAC_PI_2 - 1e-4);
    let (o, out) = reduce(dir.path(), &a, "sr-cvp", &[], "a");
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.report.json")).unwrap()).unwrap();
    let od = report["od_after"].as_f64().unwrap();
    assert!((od - 1.1547).abs() < 1e-3, "{od}");
    let b: Basis = fs::read_to_string(&out).unwrap().parse().unwrap();
    let u: UnimodularTransform = fs::read_to_string(dir.path().join("a.unimodular")).unwrap().parse().unwrap();
    assert_eq!(exact_determinant(&u.rows()).magnitude().to_string(), "1");
    assert!(reconstruction_error(&a, &u, &b) < 1e-9);
}

#[test]
fn sr_hash_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let b = dual_gaussian_basis(20, &mut stream_rng(3, 0));
    let flags = ["--seed", "17", "--k", "3", "--t", "4"];
    let (o1, _) = reduce(dir.path(), &b, "sr-hash", &flags, "first");
    let (o2, _) = reduce(dir.path(), &b, "sr-hash", &flags, "second");
    assert!(o1.status.success() && o2.status.success());
    for suffix in ["", ".unimodular", ".report.json"] {
        let x = fs::read(dir.path().join(format!("first{suffix}"))).unwrap();
        let y = fs::read(dir.path().join(format!("second{suffix}"))).unwrap();
        assert_eq!(x, y, "{suffix}");
    }
    let report = fs::read_to_string(dir.path().join("first.report.json")).unwrap();
    assert!(report.contains("\"seed\": 17"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "2 2\n1 x\n0 1\n").unwrap();
    let out = dir.path().join("o.txt");
    let o = srlat(&["reduce", "--in", path_str(&bad), "--algo", "lll", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let missing = dir.path().join("missing.txt");
    let o = srlat(&["reduce", "--in", path_str(&missing), "--algo", "lll", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let degenerate = Basis::from_columns(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
    let (o, _) = reduce(dir.path(), &degenerate, "sr-pair", &[], "deg");
    assert_eq!(o.status.code(), Some(3));

    let (o, _) = reduce(dir.path(), &Basis::identity(2), "sr-pair", &["--tau", "1.5"], "tau");
    assert_eq!(o.status.code(), Some(2));

    let o = srlat(&["bounds-check", "--dims", "5", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n <= 4"));
}

#[test]
fn ber_sweep_csv_has_header_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"n_t": 2, "n_r": 2, "qam_order": 4, "snr_db": 10, "mmse": true, "detector": "sic",
            "reducer": "sr-pair", "trials": 50, "seed": 3, "snr_points": [5, 15],
            "reducers": ["none", "lll", "sr-hash"]}"#,
    )
    .unwrap();
    let out = dir.path().join("ber.csv");
    let o = srlat(&["ber-sweep", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# srlat"));
    assert_eq!(lines[1], "# seed: 3");
    assert!(lines[2].starts_with("# params: "));
    assert_eq!(lines[3], "snr_db,detector,reducer,ber,mean_comparisons,mean_od,trials,seed");
    assert_eq!(lines.len(), 4 + 6);
    assert!(lines[4].starts_with("5,mmse-sic,none,"));

    let out2 = dir.path().join("cx.csv");
    let o = srlat(&["complexity-sweep", "--config", path_str(&cfg), "--trials", "20", "--out", path_str(&out2)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out2).unwrap();
    assert!(text.contains("snr_db,detector,reducer,mean_comparisons,mean_od,trials,seed"));

    fs::write(&cfg, "{\"n_t\": 2}").unwrap();
    let o = srlat(&["ber-sweep", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn od_sweep_and_angle_hist() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("od.csv");
    let args = [
        "od-sweep", "--dims", "3,26", "--trials", "2", "--algos", "sr-cvp,greedy,sr-pair", "--basis", "primal", "--seed", "5",
        "--out", path_str(&out),
    ];
    let o = srlat(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = fs::read_to_string(&out).unwrap();
    assert!(first.lines().any(|l| l.starts_with("26,sr-cvp,primal") && l.contains("error")));
    assert!(first.lines().any(|l| l.starts_with("3,sr-cvp,primal") && l.ends_with(",ok")));
    srlat(&args);
    assert_eq!(first, fs::read_to_string(&out).unwrap());

    let hist = dir.path().join("h.csv");
    let o = srlat(&["angle-hist", "--n", "6", "--trials", "3", "--bins", "9", "--basis", "dual", "--out", path_str(&hist)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&hist).unwrap();
    let total: u64 = text
        .lines()
        .skip(4)
        .map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 3 * 15);
}

#[test]
fn counterexamples_command_reports_golden_values() {
    let o = srlat(&["counterexamples"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let r = &v["report"];
    assert_eq!(r["greedy"]["greedy_unchanged"], true);
    assert!((r["greedy"]["sr_cvp_min_norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["pair"]["sr_pair_unchanged"], true);
    assert!((r["pair"]["sr_cvp_od"].as_f64().unwrap() - 1.1547).abs() < 1e-3);
}
