use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BASE: &str = "chain.n = 10
partition.n_s = 3
excitation.k = 2
scan.tau_min = 10
scan.tau_max = 16
scan.step = 0.01
solver.seed = 3
";

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("{BASE}{extra}")).unwrap();
    path
}

fn pstchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pstchain"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(
        dir.path(),
        "ok.conf",
        "partition.n_er = 5\nsolver.tau0 = 14.391\n",
    );
    let ok = ok.to_str().unwrap();
    assert_eq!(pstchain(&["solve", "--config", ok]).status.code(), Some(0));

    assert_eq!(pstchain(&["solve"]).status.code(), Some(2));
    let bad = write_config(
        dir.path(),
        "bad.conf",
        "partition.n_er = 5\nscan.tau_max = 5\n",
    );
    assert_eq!(
        pstchain(&["scan", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let typo = write_config(
        dir.path(),
        "typo.conf",
        "partition.n_er = 5\nchain.colour = red\n",
    );
    assert_eq!(
        pstchain(&["scan", "--config", typo.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let small = write_config(
        dir.path(),
        "small.conf",
        "partition.n_er = 3\nsolver.tau0 = 10\n",
    );
    assert_eq!(
        pstchain(&["solve", "--config", small.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );

    let stuck = write_config(
        dir.path(),
        "stuck.conf",
        "partition.n_er = 4\nsolver.tau0 = 12.493\nsolver.mode = circuit-preserving\nsolver.q = 3\nsolver.restarts = 1\nsolver.max_iter = 1\n",
    );
    assert_eq!(
        pstchain(&["fit-circuit", "--config", stuck.to_str().unwrap()])
            .status
            .code(),
        Some(4)
    );
}

#[test]
fn scan_csv_has_one_column_per_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scan.conf", "partition.n_er = 5\n");
    let csv = dir.path().join("scan.csv");
    let out = pstchain(&[
        "scan",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    let summary = json(&out);
    assert!((summary["tau0"].as_f64().unwrap() - 14.39).abs() < 0.011);

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').count();
    assert_eq!(header, 3 + 2);
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), header);
        for f in fields {
            if !f.is_empty() {
                assert!(f.parse::<f64>().unwrap().is_finite());
            }
        }
        rows += 1;
    }
    assert_eq!(rows, 601);
    assert!(csv.with_extension("summary.json").exists());
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "det.conf",
        "partition.n_er = 5\nsolver.tau0 = 14.391\n",
    );
    let cfg = cfg.to_str().unwrap();
    let a = pstchain(&["solve", "--config", cfg, "--seed", "11"]);
    let b = pstchain(&["solve", "--config", cfg, "--seed", "11", "--threads", "2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_basis_input_is_transferred_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.conf",
        "partition.n_er = 5\nsolver.tau0 = 14.391\nprotocol.input = 1, 0, 0\n",
    );
    let report = json(&pstchain(&["simulate", "--config", cfg.to_str().unwrap()]));
    assert!((report["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((report["success_probability"].as_f64().unwrap() - 0.355971).abs() < 1e-5);
    assert_eq!(report["variant"], "k-excitation");
}

#[test]
fn nonpreserving_variant_matches_preserving_probability() {
    let dir = tempfile::tempdir().unwrap();
    let pres = write_config(
        dir.path(),
        "p.conf",
        "partition.n_er = 5\nsolver.tau0 = 14.391\n",
    );
    let non = write_config(
        dir.path(),
        "np.conf",
        "partition.n_er = 5\nsolver.tau0 = 14.391\nsolver.mode = nonpreserving-general\nprotocol.variant = nonpreserving\n",
    );
    let a = json(&pstchain(&["simulate", "--config", pres.to_str().unwrap()]));
    let b = json(&pstchain(&["simulate", "--config", non.to_str().unwrap()]));
    let pa = a["success_probability"].as_f64().unwrap();
    let pb = b["success_probability"].as_f64().unwrap();
    assert!((pa - pb).abs() < 1e-6, "{pa} vs {pb}");
    assert!((b["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn solution_file_round_trips_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rt.conf",
        "partition.n_er = 4\nsolver.tau0 = 12.493\n",
    );
    let cfg = cfg.to_str().unwrap();
    let sol = dir.path().join("sol.json");
    assert!(
        pstchain(&["solve", "--config", cfg, "--out", sol.to_str().unwrap()])
            .status
            .success()
    );
    let report = json(&pstchain(&[
        "simulate",
        "--config",
        cfg,
        "--solution",
        sol.to_str().unwrap(),
    ]));
    assert!((report["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let lambda = report["lambda"]["abs"].as_f64().unwrap();
    assert!((lambda - 0.43474).abs() < 1e-4);
}
