//! End-to-end checks of the `vmshield` binary: flag contracts, exit codes,
//! artifact emission, preset fidelity and sweep behavior.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vmshield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmshield"))
        .args(args)
        .output()
        .unwrap()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

const ARTIFACTS: [&str; 4] = ["metrics.json", "ticks.csv", "actions.jsonl", "audit.jsonl"];

#[test]
fn run_preset_emits_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vmshield(&[
        "run",
        "--preset",
        "co-residency",
        "--seed",
        "7",
        "--duration",
        "300",
        "-o",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in ARTIFACTS {
        assert!(tmp.path().join(file).is_file(), "missing {file}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("run complete"),
        "summary line expected, got: {stdout}"
    );
}

#[test]
fn seed_appears_verbatim_in_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vmshield(&[
        "run",
        "--preset",
        "benign-baseline",
        "--seed",
        "424242",
        "--duration",
        "50",
        "--quiet",
        "-o",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let metrics = fs::read_to_string(tmp.path().join("metrics.json")).unwrap();
    assert!(
        metrics.contains("\"seed\": 424242"),
        "metrics.json: {metrics}"
    );
    assert!(out.stdout.is_empty(), "--quiet must suppress the summary");
}

#[test]
fn malformed_scenario_exits_2_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.json");
    fs::write(&path, "{\"seed\": 1, \"duration\": oops").unwrap();
    let out = vmshield(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("line"),
        "diagnostics should name the location: {stderr}"
    );
}

#[test]
fn preset_and_scenario_are_mutually_exclusive() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("s.json");
    fs::write(&path, "{}").unwrap();
    let out = vmshield(&[
        "run",
        "--preset",
        "co-residency",
        "--scenario",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn missing_source_exits_2() {
    let out = vmshield(&["run"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn unknown_preset_exits_2() {
    let out = vmshield(&["run", "--preset", "nonexistent"]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("available"));
}

#[test]
fn validate_accepts_every_preset() {
    for preset in [
        "benign-baseline",
        "co-residency",
        "multi-hijack",
        "grouped-cascade",
        "consolidation-demo",
    ] {
        let out = vmshield(&["validate", "--preset", preset]);
        assert_eq!(exit_code(&out), 0, "{preset}");
    }
}

#[test]
fn validate_zero_dwell_names_the_constraint() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("s.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(vmshield_cli::presets::get("co-residency").unwrap()).unwrap();
    cfg["attack"]["dwell"] = 0.into();
    fs::write(&path, cfg.to_string()).unwrap();
    let out = vmshield(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("attack.dwell") && stderr.contains("breach_dwell_time must be >= 1"),
        "constraint not named: {stderr}"
    );
}

#[test]
fn validate_negative_capacity_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("s.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(vmshield_cli::presets::get("benign-baseline").unwrap()).unwrap();
    cfg["servers"][0]["capacity"]["cpu"] = (-3.0).into();
    fs::write(&path, cfg.to_string()).unwrap();
    let out = vmshield(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn preset_run_matches_shipped_scenario_file() {
    let preset_path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join("co-residency.json");
    let tmp = tempfile::tempdir().unwrap();
    let from_preset = tmp.path().join("preset");
    let from_file = tmp.path().join("file");
    let common = ["--seed", "3", "--duration", "300", "--quiet", "-o"];

    let mut args = vec!["run", "--preset", "co-residency"];
    args.extend_from_slice(&common);
    args.push(from_preset.to_str().unwrap());
    assert_eq!(exit_code(&vmshield(&args)), 0);

    let mut args = vec!["run", "--scenario", preset_path.to_str().unwrap()];
    args.extend_from_slice(&common);
    args.push(from_file.to_str().unwrap());
    assert_eq!(exit_code(&vmshield(&args)), 0);

    for file in ARTIFACTS {
        let a = fs::read(from_preset.join(file)).unwrap();
        let b = fs::read(from_file.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between preset and shipped file");
    }
}

#[test]
fn env_var_sets_default_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_vmshield"))
        .args([
            "run",
            "--preset",
            "benign-baseline",
            "--duration",
            "50",
            "--quiet",
        ])
        .env("VMSHIELD_OUT", &out_dir)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    for file in ARTIFACTS {
        assert!(
            out_dir.join(file).is_file(),
            "missing {file} under VMSHIELD_OUT"
        );
    }
}

#[test]
fn dump_workload_emits_the_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vmshield(&[
        "run",
        "--preset",
        "benign-baseline",
        "--duration",
        "60",
        "--quiet",
        "--dump-workload",
        "-o",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let csv = fs::read_to_string(tmp.path().join("workload.csv")).unwrap();
    assert!(
        csv.starts_with("time,vm_id,server_id,cpu,mem,disk,bw\n"),
        "{csv}"
    );
}

#[test]
fn sweep_grid_produces_rows_and_subdirs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vmshield(&[
        "sweep",
        "--preset",
        "co-residency",
        "--duration",
        "300",
        "--quiet",
        "--grid",
        "audit_interval=1,2,4",
        "--grid",
        "dwell=3,5",
        "-o",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7, "header + 6 grid rows: {csv}");
    assert!(lines[0].starts_with("audit_interval,dwell,status,"));
    assert!(tmp
        .path()
        .join("audit_interval=1_dwell=3")
        .join("metrics.json")
        .is_file());
    assert!(tmp
        .path()
        .join("audit_interval=4_dwell=5")
        .join("metrics.json")
        .is_file());
}

#[test]
fn sweep_without_grid_exits_2() {
    let out = vmshield(&["sweep", "--preset", "co-residency"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn sweep_records_failing_points_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    // dwell=0 violates validation for that point only
    let out = vmshield(&[
        "sweep",
        "--preset",
        "co-residency",
        "--duration",
        "300",
        "--grid",
        "dwell=0,3",
        "-o",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("failed"), "warning expected: {stderr}");
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,failed,"), "{csv}");
    assert!(lines[2].starts_with("3,ok,"), "{csv}");
}

#[test]
fn unwritable_output_dir_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = vmshield(&[
        "run",
        "--preset",
        "benign-baseline",
        "--duration",
        "20",
        "--quiet",
        "-o",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        3,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn attack_override_switches_the_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vmshield(&[
        "run",
        "--preset",
        "co-residency",
        "--attack",
        "none",
        "--duration",
        "300",
        "--quiet",
        "-o",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let metrics = fs::read_to_string(tmp.path().join("metrics.json")).unwrap();
    assert!(metrics.contains("\"attacks_established\": 0"), "{metrics}");
}
