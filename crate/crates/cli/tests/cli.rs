use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn divr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divr"))
        .args(args)
        .env("DIVR_BASE_URL", "mock://synthetic")
        .env_remove("DIVR_CACHE_DIR")
        .output()
        .unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/records20.jsonl")
}

#[test]
fn score_text_prints_report() {
    let out = divr(&["score", "--text", "a a a a"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["token_count"], 4);
    assert_eq!(v["lex"], 0.25);
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = divr(&["score", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&out.stderr).trim().lines().count(), 1);
}

#[test]
fn runtime_failure_exits_one_with_one_line() {
    let out = divr(&["score", "--file", "/nonexistent/input.txt"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.starts_with("error:"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(divr(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_more_think_records_three_continuations() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report");
    let fx = fixture();
    let out = divr(&[
        "eval",
        "--dataset",
        fx.to_str().unwrap(),
        "--strategy",
        "morethink",
        "--waits",
        "3",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rows = csv::Reader::from_path(report.join("records.csv")).unwrap();
    let col = rows.headers().unwrap().iter().position(|h| h == "injected_continuations").unwrap();
    let values: Vec<String> = rows.records().map(|r| r.unwrap()[col].to_string()).collect();
    assert_eq!(values.len(), 20);
    assert!(values.iter().all(|v| v == "3"));
    assert!(report.join("scatter.svg").exists());
}

#[test]
fn eval_reads_pregenerated_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.jsonl");
    std::fs::write(
        &records,
        r#"{"id":"x","task":"t","question":"q?","options":["A","B"],"merge_mode":"convergent","ground_truth":{"mode":"convergent","scalar_answer":"B"},"preset_roles":null}
"#,
    )
    .unwrap();
    let outputs = dir.path().join("outputs.jsonl");
    std::fs::write(&outputs, "{\"id\":\"x\",\"text\":\"<think>hm</think> **(B)**\"}\n").unwrap();
    let report = dir.path().join("r");
    let out = divr(&[
        "eval",
        "--dataset",
        records.to_str().unwrap(),
        "--outputs",
        outputs.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["aggregate_accuracy"], 1.0);
}

#[test]
fn calibrate_reads_sub_score_ratings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratings.jsonl");
    // ratings track the first sub-score only
    let lines: String = (0..8)
        .map(|i| {
            let v = i as f64 / 8.0;
            format!("{{\"rating\":{},\"sub_scores\":[{v},0.5,0.5,0.5,0.5,0.5,0.5,0.5]}}\n", 1.0 + 9.0 * v)
        })
        .collect();
    std::fs::write(&path, lines).unwrap();
    let out = divr(&["calibrate", "--ratings", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["pearson"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn pipeline_build_rejects_bad_filter() {
    let out = divr(&["pipeline", "build", "--dataset", "x", "--out", "y", "--filter", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn health_and_empty_group() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(async move {
        axum::serve(listener, divr::server::router(Default::default())).await.unwrap();
    });
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut health = agent.get(&format!("http://{addr}/v1/health")).call().unwrap();
    assert_eq!(health.body_mut().read_to_string().unwrap(), r#"{"status":"ok"}"#);
    let body = r#"{"completions":[],"ground_truth":{"mode":"convergent","scalar_answer":"A"},
        "answer_format":{"pattern_kind":"bold_letter","alphabet":["A","B"]}}"#;
    let mut resp = agent.post(&format!("http://{addr}/v1/score")).send(body).unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    assert!(resp.body_mut().read_to_string().unwrap().contains("error"));
}
