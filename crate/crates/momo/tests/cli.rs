//! End-to-end binary tests: exit codes, determinism, and fixture handling.

use std::path::Path;
use std::process::{Command, Output};

fn momo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_momo"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    momo()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn exit_codes_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = run_in(tmp.path(), &["--help"]);
    assert_eq!(ok.status.code(), Some(0));
    let ok = run_in(tmp.path(), &["verify", "identity"]);
    assert_eq!(ok.status.code(), Some(0), "identity suite passes");
    let bad_suite = run_in(tmp.path(), &["verify", "no-such-suite"]);
    assert_eq!(bad_suite.status.code(), Some(2));
    let bad_key = run_in(tmp.path(), &["verify", "identity", "--set", "bogus=1"]);
    assert_eq!(bad_key.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&bad_key.stderr);
    assert!(stderr.contains("bogus"), "diagnostic names the bad key: {stderr}");
}

#[test]
fn verify_output_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_in(tmp.path(), &["verify", "duality-exact"]);
    let b = run_in(tmp.path(), &["verify", "duality-exact"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout, "byte-identical reports");
    let text = String::from_utf8(a.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).expect("JSON report");
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["pass"], true);
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    let a = run_in(t1.path(), &["simulate", "--out", "run"]);
    let b = run_in(t2.path(), &["simulate", "--out", "run"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let mut names: Vec<String> = std::fs::read_dir(t1.path().join("run"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        vec!["sde_path.csv", "x_path.csv", "z_limit_path.csv", "z_path.csv"]
    );
    for name in &names {
        let fa = std::fs::read(t1.path().join("run").join(name)).unwrap();
        let fb = std::fs::read(t2.path().join("run").join(name)).unwrap();
        assert_eq!(fa, fb, "{name} byte-identical across runs");
        let text = String::from_utf8(fa).unwrap();
        assert!(text.starts_with("schema_version,t,"), "{name} header");
        assert!(text.contains("\r\n"), "{name} uses CRLF line endings");
    }
    let c = run_in(t1.path(), &["simulate", "--seed", "99", "--out", "other"]);
    assert_eq!(c.status.code(), Some(0));
    let fa = std::fs::read(t1.path().join("run/x_path.csv")).unwrap();
    let fc = std::fs::read(t1.path().join("other/x_path.csv")).unwrap();
    assert_ne!(fa, fc, "a different seed changes the trajectory");
}

#[test]
fn csv_format_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["verify", "identity", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "schema_version"));
    assert!(reader.records().next().is_some());
}

#[test]
fn fixture_record_replay_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = run_in(tmp.path(), &["fixture", "record", "fx.json"]);
    assert_eq!(rec.status.code(), Some(0), "{}", String::from_utf8_lossy(&rec.stderr));
    let rep = run_in(tmp.path(), &["fixture", "replay", "fx.json"]);
    assert_eq!(rep.status.code(), Some(0));
    let text = String::from_utf8(rep.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["recorded_comparison"], true);
}

#[test]
fn corrupted_fixture_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.json"), "{ not json").unwrap();
    let out = run_in(tmp.path(), &["fixture", "replay", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("fixture"), "parse diagnostic: {stderr}");
    let missing = run_in(tmp.path(), &["fixture", "replay", "absent.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bundled_fixture_replays() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/two_event.json");
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["fixture", "replay", fixture.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("JSON replay report");
    assert_eq!(report["recorded_comparison"], true);
    // The recorded endpoints include the documented Frankenstein states.
    let derived = &report["derived"]["frankenstein"];
    let as_pairs: Vec<(String, String)> = serde_json::from_value(derived.clone()).unwrap();
    let du = as_pairs.iter().find(|(k, _)| k == "DU").unwrap();
    assert_eq!(du.1, "I=[1,2,3,4]; *R*R");
}

#[test]
fn config_file_and_set_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("cfg.json"),
        r#"{ "n_pop": 4, "seed": 7 }"#,
    )
    .unwrap();
    let a = run_in(
        tmp.path(),
        &["--config", "cfg.json", "verify", "duality-exact"],
    );
    assert_eq!(a.status.code(), Some(0));
    let b = run_in(
        tmp.path(),
        &["verify", "duality-exact", "--set", "n_pop=4", "--set", "seed=7"],
    );
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout, "config file and --set agree");
}
