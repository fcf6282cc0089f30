use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ipslab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipslab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const USQUARE_RUN: &str = r#"{"protocol":"thm6-usquare","input":["aaaa","aaaaa"],"prover":["honest","off-by-one"],"trials":40,"seed":9}"#;

#[test]
fn run_writes_jsonl_and_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.json",
        r#"{"protocol":"thm6-usquare","input":"usquare-members(2,3)","trials":30}"#,
    );
    let out = tmp.path().join("out");
    let o = ipslab(
        &["run", "--config", &cfg, "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let lines: Vec<serde_json::Value> = fs::read_to_string(out.join("runs.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    for l in &lines {
        assert_eq!(l["stats"]["accepts"], 30);
        assert_eq!(l["member"], true);
    }

    let mut csv = csv::Reader::from_path(out.join("runs.csv")).unwrap();
    let headers = csv.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "accept_rate"));
    assert_eq!(csv.records().count(), 2);
}

#[test]
fn same_seed_same_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.json", USQUARE_RUN);
    let a = ipslab(
        &["run", "--config", &cfg, "--seed", "3", "--workers", "2"],
        tmp.path(),
    );
    let b = ipslab(
        &["run", "--config", &cfg, "--seed", "3", "--workers", "1"],
        tmp.path(),
    );
    let c = ipslab(&["run", "--config", &cfg, "--seed", "4"], tmp.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn trials_and_budget_flags_override_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.json",
        r#"{"protocol":"thm6-usquare","input":"aaaaaaaaa","trials":500}"#,
    );
    let o = ipslab(
        &[
            "run",
            "--config",
            &cfg,
            "--trials",
            "7",
            "--budget-steps",
            "5",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let rec: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(rec["stats"]["trials"], 7);
    assert_eq!(rec["stats"]["timeouts"], 7);
}

#[test]
fn config_errors_exit_2_without_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let outs = out.to_str().unwrap();
    let bad = [
        r#"{"protocol":"thm6-usquare","input":"aaaa","trails":10}"#,
        r#"{"protocol":"no-such-protocol","input":"aaaa"}"#,
        r#"{"protocol":"thm6-usquare","input":"aaba"}"#,
        r#"{"protocol":"thm6-usquare","input":"aaaa","trials":0}"#,
        r#"{"protocol":"thm6-usquare","input":"usquare-member(0)"}"#,
        r#"{"protocol":"thm1-unary","input":"aa"}"#,
        r#"{"protocol":"thm6-usquare","input":"aaaa","params":{"q":4}}"#,
        r#"{"protocol":"thm6-usquare","input":"aaaa""#,
    ];
    for (i, body) in bad.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("bad{i}.json"), body);
        let o = ipslab(&["run", "--config", &cfg, "--out", outs], tmp.path());
        assert_eq!(
            o.status.code(),
            Some(2),
            "{body}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!out.exists(), "{body} wrote a report");
    }
    let o = ipslab(&["run", "--config", "missing.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = ipslab(&["run", "--frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

fn suite(checks: &str) -> String {
    format!(r#"{{"name":"t","seed":1,"checks":[{checks}]}}"#)
}

const PASSING: &str = r#"{"name":"members","trials":{"protocol":"thm6-usquare","input":"aaaa","trials":50},
    "assert":[{"metric":"accept-rate","op":"==","bound":1}]}"#;
const FAILING: &str = r#"{"name":"impossible","trials":{"protocol":"thm6-usquare","input":"aaaa","trials":50},
    "assert":[{"metric":"reject-rate","op":">=","bound":"1/2"}]}"#;

#[test]
fn check_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let pass = write(tmp.path(), "pass.json", &suite(PASSING));
    let o = ipslab(&["check", &pass], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PASS members"));

    let fail = write(
        tmp.path(),
        "fail.json",
        &suite(&format!("{PASSING},{FAILING}")),
    );
    let out = tmp.path().join("out");
    let o = ipslab(
        &["check", &fail, "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL impossible"));
    let mut csv = csv::Reader::from_path(out.join("check.csv")).unwrap();
    let statuses: Vec<String> = csv.records().map(|r| r.unwrap()[3].to_string()).collect();
    assert_eq!(statuses, ["PASS", "FAIL"]);

    let empty = write(tmp.path(), "empty.json", &suite(""));
    assert_eq!(
        ipslab(&["check", &empty], tmp.path()).status.code(),
        Some(2)
    );

    let bad_metric = write(
        tmp.path(),
        "metric.json",
        &suite(
            r#"{"name":"x","trials":{"protocol":"thm6-usquare","input":"aaaa"},"assert":[{"metric":"detection","op":"==","bound":1}]}"#,
        ),
    );
    let out2 = tmp.path().join("out2");
    let o = ipslab(
        &["check", &bad_metric, "--out", out2.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!out2.exists());

    assert_eq!(
        ipslab(&["check", "no-such-suite"], tmp.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn check_by_config_flag() {
    let tmp = TempDir::new().unwrap();
    let pass = write(tmp.path(), "pass.json", &suite(PASSING));
    let o = ipslab(&["check", "--config", &pass, "--trials", "5"], tmp.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn shipped_suite_validates() {
    let suite = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../suites/paper-bounds.json");
    let s: ipslab_cli::suite::Suite = ipslab_cli::config::read_json(&suite).unwrap();
    s.validate(&Default::default()).unwrap();
    assert_eq!(s.name, "paper-bounds");
}

#[test]
fn sweep_fits_growth() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.json",
        r#"{"protocol":"thm8-dima2","input":"dima2-members(1,3)","trials":10}"#,
    );
    let out = tmp.path().join("out");
    let o = ipslab(
        &["sweep", "--config", &cfg, "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: serde_json::Value = serde_json::from_str(
        fs::read_to_string(out.join("sweep.jsonl"))
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    let exponent = rec["steps_fit"]["exponent"].as_f64().unwrap();
    assert!((0.8..=1.2).contains(&exponent), "{exponent}");
    assert_eq!(
        csv::Reader::from_path(out.join("sweep.csv"))
            .unwrap()
            .records()
            .count(),
        3
    );

    let two = write(
        tmp.path(),
        "two.json",
        r#"{"protocol":"thm8-dima2","input":"dima2-members(1,2)"}"#,
    );
    assert_eq!(
        ipslab(&["sweep", "--config", &two], tmp.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn calibrate_and_report() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("cal");
    let o = ipslab(
        &[
            "calibrate",
            "--m",
            "12",
            "--epsilon",
            "1",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: serde_json::Value = serde_json::from_str(
        fs::read_to_string(out.join("calibration.jsonl"))
            .unwrap()
            .trim(),
    )
    .unwrap();
    assert_eq!(rec["c"], 1);
    assert_eq!(
        ipslab(&["calibrate", "--m", "12"], tmp.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ipslab(&["calibrate", "--m", "12", "--epsilon", "x"], tmp.path())
            .status
            .code(),
        Some(2)
    );

    let cfg = write(tmp.path(), "run.json", USQUARE_RUN);
    let runs = tmp.path().join("runs");
    assert!(ipslab(
        &["run", "--config", &cfg, "--out", runs.to_str().unwrap()],
        tmp.path()
    )
    .status
    .success());
    let rep = tmp.path().join("rep");
    let o = ipslab(
        &[
            "report",
            runs.join("runs.jsonl").to_str().unwrap(),
            "--out",
            rep.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("off-by-one"));
    assert_eq!(
        csv::Reader::from_path(rep.join("report.csv"))
            .unwrap()
            .records()
            .count(),
        4
    );

    let empty = write(tmp.path(), "empty.jsonl", "");
    assert_eq!(
        ipslab(&["report", &empty], tmp.path()).status.code(),
        Some(2)
    );
}
