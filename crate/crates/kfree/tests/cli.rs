//! End-to-end checks of the command-line binary: exit codes, frozen counts,
//! determinism of the output bytes, and the manifest digest contract.

use std::process::{Command, Output};

fn kfree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfree"))
        .args(args)
        .env_remove("KFREE_PRECISION")
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn last_csv_field(csv: &str, column: usize) -> String {
    let line = csv.lines().rev().find(|l| !l.is_empty()).unwrap();
    line.split(',').nth(column).unwrap().to_string()
}

#[test]
fn sieve_final_counts_match_references() {
    let out = kfree(&["sieve", "--k", "2", "--limit", "1000000"]);
    assert!(out.status.success());
    let csv = stdout_str(&out);
    assert_eq!(last_csv_field(&csv, 0), "1000000");
    assert_eq!(last_csv_field(&csv, 1), "607926");

    let out = kfree(&["sieve", "--k", "2", "--limit", "10"]);
    assert!(out.status.success());
    assert_eq!(last_csv_field(&stdout_str(&out), 1), "7");
}

#[test]
fn domain_errors_exit_2() {
    assert_eq!(kfree(&["sieve", "--k", "1", "--limit", "10"]).status.code(), Some(2));
    assert_eq!(
        kfree(&["moments", "short", "--k", "2", "--x", "100", "--H", "4", "--ell", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(kfree(&["verify", "nosuchsuite"]).status.code(), Some(2));
    // clap's own parse failures use the same code
    assert_eq!(kfree(&["sieve", "--limit", "10"]).status.code(), Some(2));
    assert_eq!(kfree(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn capacity_and_budget_exit_codes() {
    // a window over 10^10 bits exceeds the sieve capacity
    let out = kfree(&["sieve", "--k", "2", "--limit", "10000000000"]);
    assert_eq!(out.status.code(), Some(3));
    // thousands of admissible radii blow the series enumeration budget
    let out = kfree(&[
        "cseries", "--H", "4", "--ell", "3", "--q", "1", "--k", "2", "--method", "fourier",
        "--radius", "2000",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn singular_single_shift_is_zeta_inverse() {
    let out = kfree(&["singular", "--q", "1", "--k", "2", "--shifts", "0"]);
    assert!(out.status.success());
    let value = last_csv_field(&stdout_str(&out), 3);
    assert!(value.starts_with("0.6079271018540266"), "value {value}");
}

#[test]
fn reruns_are_byte_identical_and_digested() {
    let args = ["moments", "short", "--k", "2", "--x", "1000", "--H", "4", "--ell", "2"];
    let a = kfree(&args);
    let b = kfree(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "stdout must be reproducible");

    // the stderr manifest's digest covers exactly the stdout bytes
    let manifest: serde_json::Value =
        serde_json::from_str(String::from_utf8(a.stderr).unwrap().trim()).unwrap();
    let digest = manifest["output_digest"].as_str().unwrap();
    let expected = format!("sha256:{}", kfree::report::sha256_hex(&a.stdout));
    assert_eq!(digest, expected);
    assert_eq!(manifest["schema_version"], "1");
    assert_eq!(manifest["parameters"]["H"], "4");
}

#[test]
fn json_format_has_versioned_schema() {
    let out = kfree(&[
        "singular", "--q", "5", "--k", "2", "--shifts", "0,2", "--format", "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(v["schema_version"], "1");
    assert_eq!(v["table"], "singular");
    assert_eq!(v["rows"][0][2], "0;2");
}

#[test]
fn cseries_both_reports_delta_within_reported_err() {
    let out = kfree(&[
        "cseries", "--H", "2", "--ell", "2", "--q", "1", "--k", "2", "--method", "both",
        "--radius", "30",
    ]);
    assert!(out.status.success());
    let csv = stdout_str(&out);
    let delta_row: Vec<&str> = csv
        .lines()
        .find(|l| l.contains(",delta,"))
        .expect("delta row present")
        .split(',')
        .collect();
    let value: f64 = delta_row[7].parse().unwrap();
    let err: f64 = delta_row[8].parse().unwrap();
    assert!(value <= err, "cross-method delta {value} exceeds combined err {err}");
}

#[test]
fn verify_oracle_suite_passes() {
    let out = kfree(&["verify", "oracle"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(v["ok"], true);
    assert_eq!(v["results"][0]["id"], 9);
    assert_eq!(v["results"][0]["passed"], true);
}

#[test]
fn precision_env_var_widens_output() {
    let out = Command::new(env!("CARGO_BIN_EXE_kfree"))
        .args(["singular", "--q", "1", "--k", "2", "--shifts", "0", "--tol", "1e-20"])
        .env("KFREE_PRECISION", "80")
        .output()
        .unwrap();
    assert!(out.status.success());
    let value = last_csv_field(&stdout_str(&out), 3);
    // 80 fractional digits requested via the environment
    assert_eq!(value.len(), 2 + 80, "value {value}");
    let manifest: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(manifest["precision_digits"], 80);
}
