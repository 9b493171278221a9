//! Batch front-end behavior: exit codes, failure markers, dry runs,
//! subcommand artifacts and reproducibility from saved datasets.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sindy1d")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("sindy1d_cli_tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(bin()).args(args).output().expect("spawn cli")
}

#[test]
fn config_errors_exit_with_code_2() {
    let out = run(&[
        "discover",
        "--config",
        config("burgers.conf").to_str().unwrap(),
        "--set",
        "case.mystery=1",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("mystery"), "{stderr}");

    let out = run(&["discover", "--config", "/nonexistent.conf", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dry_run_prints_library_and_touches_nothing() {
    let dir = scratch("dry");
    let out = run(&[
        "discover",
        "--config",
        config("burgers.conf").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "1",
        "--dry-run",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("17 terms"), "{stdout}");
    assert!(stdout.contains("u*u_x|uw2"), "{stdout}");
    assert!(!dir.exists(), "dry run must not create the output directory");
}

#[test]
fn failed_runs_leave_a_marker() {
    let dir = scratch("marker");
    // An sgs-discover on the heat equation is a config-level failure that
    // happens after the output directory exists.
    let out = run(&[
        "sgs-discover",
        "--config",
        config("heat.conf").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.join("FAILED").exists());
    assert!(!dir.join(".running").exists());
}

#[test]
fn simulate_then_discover_from_archive_is_reproducible() {
    let sim_dir = scratch("sim");
    let out = run(&[
        "simulate",
        "--config",
        config("heat.conf").to_str().unwrap(),
        "--set",
        "case.realizations=4",
        "--set",
        "case.n_t=60",
        "--set",
        "case.t_max=0.2",
        "--out",
        sim_dir.to_str().unwrap(),
        "--seed",
        "21",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let archive = sim_dir.join("dataset");
    assert!(archive.join("manifest.txt").exists());

    let strip_timings = |dir: &Path| -> (serde_json::Value, String) {
        let mut report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.join("report.json")).unwrap(),
        )
        .unwrap();
        report.as_object_mut().unwrap().remove("timings_ms");
        (
            report,
            std::fs::read_to_string(dir.join("terms.csv")).unwrap(),
        )
    };

    let discover = |name: &str| {
        let dir = scratch(name);
        let data_arg = format!("case.data={}", archive.display());
        let out = run(&[
            "discover",
            "--config",
            config("heat.conf").to_str().unwrap(),
            "--set",
            &data_arg,
            "--set",
            "case.realizations=4",
            "--set",
            "case.n_t=60",
            "--set",
            "case.t_max=0.2",
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "21",
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        strip_timings(&dir)
    };
    let a = discover("disc_a");
    let b = discover("disc_b");
    assert_eq!(a.0, b.0, "reports must match byte-for-byte minus timings");
    assert_eq!(a.1, b.1, "term tables must match");
}

#[test]
fn ablate_emits_the_toggle_grid_with_orderings() {
    let dir = scratch("ablate");
    let out = run(&[
        "ablate",
        "--config",
        config("burgers.conf").to_str().unwrap(),
        "--set",
        "case.realizations=4",
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = std::fs::read_to_string(dir.join("ablate.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 8, "{csv}");

    let field = |row: &str, idx: usize| row.split(',').nth(idx).unwrap().to_string();
    // Library shrinks with DSF on; memory proxy shrinks with batching.
    for row in &rows {
        let dsf = field(row, 1) == "true";
        let lib: usize = field(row, 6).parse().unwrap();
        assert_eq!(lib, if dsf { 17 } else { 22 }, "{row}");
    }
    let proxy = |dsf: bool, gram: bool, ens: bool| -> u64 {
        rows.iter()
            .find(|r| {
                field(r, 1) == dsf.to_string()
                    && field(r, 2) == gram.to_string()
                    && field(r, 3) == ens.to_string()
            })
            .map(|r| field(r, 5).parse().unwrap())
            .unwrap()
    };
    // Gram batching reduces the RAM proxy at every other setting.
    for dsf in [false, true] {
        for ens in [false, true] {
            assert!(proxy(dsf, true, ens) < proxy(dsf, false, ens));
        }
    }
}
