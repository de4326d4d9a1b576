//! End-to-end runs of the `levysel` binary: artifacts, determinism and the
//! exit-code contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use levysel::cli::strip_timestamp;

const SMALL: &str = "\
[noise]
sigma1 = 0.5
sigma2 = 0.5
source = normal 1 1
step = 0.01

[signal]
name = paper

[grid]

[shrinkage]
sigma_lower = 0.25
sigma_upper = 0.5

[experiment]
horizons = 20, 40
horizon = 20
replicates = 3
eval_points = 2001
seed = 99
figure_points = 11
improvement_n = 40
improvement_head = 10
improvement_replicates = 100
integral_horizon = 10
integral_replicates = 200
gram_records = 50
sigma_horizons = 20, 100
sigma_replicates = 50
oracle_horizons = 40
oracle_replicates = 20
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_levysel"));
    c.env_remove("LEVYSEL_THREADS");
    c
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let sim = dir.path().join("sim");
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&sim), "--quiet"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let path = fs::read_to_string(sim.join("path.csv")).unwrap();
    assert!(path.lines().any(|l| l == "t,y"));
    assert_eq!(path.lines().filter(|l| !l.starts_with('#')).count(), 20 * 100 + 2);
    let jumps = fs::read_to_string(sim.join("jumps.csv")).unwrap();
    assert!(jumps.lines().any(|l| l == "time,size,source_index"));

    let est = dir.path().join("est");
    let o = run(&[
        "estimate",
        "--config",
        s(&cfg),
        "--path",
        s(&sim.join("path.csv")),
        "--out",
        s(&est),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let coeffs = fs::read_to_string(est.join("coefficients.csv")).unwrap();
    assert!(coeffs.lines().any(|l| l == "j,theta_hat,theta_star,lambda"));
    assert_eq!(coeffs.lines().filter(|l| !l.starts_with('#')).count(), 21);
    let costs = fs::read_to_string(est.join("cost_table.csv")).unwrap();
    assert!(costs.lines().any(|l| l == "beta,r,omega,d,cost,penalty"));
    let summary = fs::read_to_string(est.join("summary.csv")).unwrap();
    for key in ["sigma_hat,", "beta,", "c_n,", "cost,"] {
        assert!(summary.lines().any(|l| l.starts_with(key)), "{key}");
    }
}

#[test]
fn every_csv_carries_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let out = dir.path().join("exp");
    assert_eq!(code(&run(&["experiment", "--config", s(&cfg), "--out", s(&out), "--quiet"])), 0);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    let digest = manifest.lines().find_map(|l| l.strip_prefix("digest=")).unwrap().to_string();
    let mut seen = 0;
    for entry in fs::read_dir(&out).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "csv") {
            let text = fs::read_to_string(&p).unwrap();
            assert!(text.lines().any(|l| l == format!("# digest={digest}")), "{}", p.display());
            seen += 1;
        }
    }
    // risk report plus one figure per horizon
    assert_eq!(seen, 3);
    let report = fs::read_to_string(out.join("risk_report.csv")).unwrap();
    assert!(report
        .lines()
        .any(|l| l == "n,estimator,risk,stderr,ratio,c_n,sigma_hat_mean"));
    let fig = fs::read_to_string(out.join("figure_n20.csv")).unwrap();
    assert!(fig.lines().any(|l| l == "t,S,S_hat,S_star"));
    assert!(fs::read_to_string(out.join("table.txt")).unwrap().contains("R(S*_l*)"));
}

#[test]
fn digest_ignores_comments_and_spacing() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_cfg(dir.path(), "a.cfg", SMALL);
    let reformatted = format!(
        "# reformatted copy\n\n{}",
        SMALL.replace(" = ", "   =  ").replace("[grid]", "[grid]   # defaults")
    );
    let b = write_cfg(dir.path(), "b.cfg", &reformatted);
    let digest = |cfg: &Path, out: &str| {
        let out = dir.path().join(out);
        assert_eq!(code(&run(&["simulate", "--config", s(cfg), "--out", s(&out), "--quiet"])), 0);
        fs::read_to_string(out.join("manifest.txt"))
            .unwrap()
            .lines()
            .find_map(|l| l.strip_prefix("digest=").map(str::to_string))
            .unwrap()
    };
    assert_eq!(digest(&a, "da"), digest(&b, "db"));
}

fn artifacts(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                strip_timestamp(&fs::read_to_string(&p).unwrap()),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_reproduces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let go = |cmd: &str, out: &str, extra: &[&str]| {
        let out = dir.path().join(out);
        let mut args = vec![cmd, "--config", s(&cfg), "--out", s(&out), "--quiet"];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    for cmd in ["simulate", "experiment"] {
        let a = artifacts(&go(cmd, &format!("{cmd}1"), &[]));
        let b = artifacts(&go(cmd, &format!("{cmd}2"), &["--threads", "1"]));
        assert_eq!(a, b, "{cmd}");
        let c = artifacts(&go(cmd, &format!("{cmd}3"), &["--seed", "100"]));
        assert_ne!(a, c, "{cmd}");
    }
    let est = |out: &str| {
        let o = run(&[
            "estimate",
            "--config",
            s(&cfg),
            "--path",
            s(&dir.path().join("simulate1/path.csv")),
            "--out",
            s(&dir.path().join(out)),
            "--quiet",
        ]);
        assert_eq!(code(&o), 0);
        artifacts(&dir.path().join(out))
    };
    assert_eq!(est("e1"), est("e2"));
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let o = bin()
        .args(["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o")), "--quiet"])
        .env("LEVYSEL_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let o = bin()
        .args(["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o")), "--quiet"])
        .env("LEVYSEL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = run(&["simulate", "--config", s(&cfg), "--threads", "0", "--quiet"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_step_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", &SMALL.replace("step = 0.01", "step = 0.003"));
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("[noise] step"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&blocker.join("sub"))]);
    assert_eq!(code(&o), 3);
    let o = run(&["simulate", "--config", s(&dir.path().join("missing.cfg"))]);
    assert_eq!(code(&o), 3);
}

#[test]
fn malformed_path_csv_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let sim = dir.path().join("sim");
    assert_eq!(code(&run(&["simulate", "--config", s(&cfg), "--out", s(&sim), "--quiet"])), 0);
    let text = fs::read_to_string(sim.join("path.csv")).unwrap();
    let estimate = |csv: &Path| run(&["estimate", "--config", s(&cfg), "--path", s(csv), "--out", s(&dir.path().join("e"))]);

    let truncated = dir.path().join("truncated.csv");
    let keep = text.lines().count() / 2;
    fs::write(&truncated, text.lines().take(keep).collect::<Vec<_>>().join("\n")).unwrap();
    let o = estimate(&truncated);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains(&format!("row {keep}")));

    // cut in the middle of a row
    let cut = dir.path().join("cut.csv");
    fs::write(&cut, &text[..text.len() - 7]).unwrap();
    assert_eq!(code(&estimate(&cut)), 2);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&estimate(&empty)), 2);

    let header_only = dir.path().join("header.csv");
    fs::write(&header_only, "t,y\n").unwrap();
    assert_eq!(code(&estimate(&header_only)), 2);
}

#[test]
fn experiment_requires_grid_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", &SMALL.replace("[grid]\n", ""));
    let o = run(&["experiment", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[grid]"));
}

#[test]
fn inconsistent_variance_bound_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", &SMALL.replace("sigma_upper = 0.5", "sigma_upper = 0.2"));
    let o = run(&["check", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn check_passes_on_small_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let o = run(&["check", "--config", s(&cfg)]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
    assert!(out.contains("improvement") && out.contains("isometry") && out.contains("gram"));
}

#[test]
fn check_failure_exits_one() {
    // with d = 1 shrinkage is off, so the strict improvement check cannot pass
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", &SMALL.replace("improvement_head = 10", "improvement_head = 1"));
    let o = run(&["check", "--config", s(&cfg), "--quiet"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bundled_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["paper.cfg", "smoke.cfg", "gaussian.cfg"] {
        let cfg = levysel::cli::RunConfig::from_path(&root.join(name)).unwrap();
        cfg.require_grid().unwrap();
    }
}

#[test]
fn smoke_config_is_quick() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.cfg");
    let start = Instant::now();
    let o = run(&["experiment", "--config", s(&cfg), "--out", s(&dir.path().join("o")), "--quiet"]);
    assert_eq!(code(&o), 0);
    assert!(start.elapsed().as_secs_f64() < 10.0);
}
