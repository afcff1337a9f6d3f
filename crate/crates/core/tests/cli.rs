use std::fs;
use std::process::Command;

fn dsmc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dsmc"))
}

const CONFIG: &str = "\
[topology]
kind = dsmc
n = 16
r = 2
[traffic]
pattern = mixed
injection_rate = 1.0
[run]
cycles = 3000
warmup = 300
seed = 42
[sweep]
rates = 0.2,1.0
";

#[test]
fn analyze_emits_utilization_table() {
    let out = dsmc()
        .args(["analyze", "--n", "16", "--k", "16", "--pa", "1.0", "--r-max", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("n,k,p_a,r"));
    assert!(text.contains("0.643926"));
}

#[test]
fn crossings_reports_reduction_ratio() {
    let out = dsmc().args(["crossings", "--n", "16"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("415.568"));
    assert!(text.contains("246016"));
}

#[test]
fn simulate_is_deterministic_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, CONFIG).unwrap();
    let run = || {
        let out = dsmc().arg("simulate").arg(&cfg).output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn seed_flag_changes_the_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, CONFIG).unwrap();
    let with_seed = |seed: &str| {
        let out = dsmc()
            .args(["simulate", "--seed", seed])
            .arg(&cfg)
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_ne!(with_seed("1"), with_seed("2"));
}

#[test]
fn sweep_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let csv = dir.path().join("sweep.csv");
    let svg = dir.path().join("latency.svg");
    fs::write(&cfg, CONFIG).unwrap();
    let out = dsmc()
        .arg("sweep")
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .arg("--svg")
        .arg(&svg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows = fs::read_to_string(&csv).unwrap();
    // Header plus one baseline and one dsmc row per rate.
    assert_eq!(rows.lines().count(), 1 + 4);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn bad_config_exits_nonzero_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "[topology]\nbogus = 1\n").unwrap();
    let out = dsmc().arg("simulate").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2"));
}
