//! HTTP edge-case coverage for the session service and an end-to-end drive
//! of the installed binary: gen -> run -> score -> report.

use std::process::Command;

use seqbench_cli::service::{CreateResponse, ServiceHandle, StepResponse, TranscriptResponse};
use seqbench_core::{EnvKind, Mode, Termination, TestCase, Validity};
use serde_json::{json, Value};

fn post(url: &str, body: Value) -> reqwest::blocking::Response {
    reqwest::blocking::Client::new()
        .post(url)
        .json(&body)
        .send()
        .expect("request sends")
}

#[test]
fn service_rejects_bad_requests_without_side_effects() {
    let service = ServiceHandle::spawn().unwrap();
    let base = &service.base_url;
    let http = reqwest::blocking::Client::new();

    // Liveness.
    let health = http.get(format!("{base}/healthz")).send().unwrap();
    assert_eq!(health.status(), 200);
    assert_eq!(health.text().unwrap(), "ok");

    // Neither a case nor the kind+mode+seed triple.
    assert_eq!(post(&format!("{base}/sessions"), json!({})).status(), 422);
    // Both at once.
    let case = seqbench_core::testgen::gen_case(EnvKind::Dfs, Mode::Easy, 1);
    assert_eq!(
        post(
            &format!("{base}/sessions"),
            json!({"case": case, "kind": "dfs", "mode": "easy", "seed": 1}),
        )
        .status(),
        422
    );
    // Syntactically broken JSON.
    let broken = http
        .post(format!("{base}/sessions"))
        .header("content-type", "application/json")
        .body("{\"kind\": ")
        .send()
        .unwrap();
    assert_eq!(broken.status(), 422);

    // Unknown session ids.
    let ghost = uuid::Uuid::new_v4();
    assert_eq!(
        post(&format!("{base}/sessions/{ghost}/step"), json!({"action": 1})).status(),
        404
    );
    assert_eq!(
        http.get(format!("{base}/sessions/{ghost}/transcript"))
            .send()
            .unwrap()
            .status(),
        404
    );
    assert_eq!(
        http.delete(format!("{base}/sessions/{ghost}"))
            .send()
            .unwrap()
            .status(),
        404
    );

    // A healthy session; the first optimal probe for this interval is 16416,
    // so a case with that target solves in one step.
    let case = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 77, 16_416).unwrap();
    let created = post(&format!("{base}/sessions"), json!({"case": case}));
    assert_eq!(created.status(), 201);
    let created: CreateResponse = created.json().unwrap();
    assert_eq!(created.case.content_key(), case.content_key());
    assert!(created.observation.is_none(), "guess envs start silent");
    let id = created.session_id;

    // A malformed step body consumes nothing.
    let bad_step = http
        .post(format!("{base}/sessions/{id}/step"))
        .header("content-type", "application/json")
        .body("{\"action\": \"three\"}")
        .send()
        .unwrap();
    assert_eq!(bad_step.status(), 422);
    let snapshot: TranscriptResponse = http
        .get(format!("{base}/sessions/{id}/transcript"))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert!(snapshot.steps.is_empty(), "rejected step must not land");

    // Solve it, then verify the session refuses further steps.
    let step: StepResponse = post(
        &format!("{base}/sessions/{id}/step"),
        json!({"action": 16_416}),
    )
    .json()
    .unwrap();
    assert_eq!(step.validity, Validity::Valid);
    assert!(step.following);
    assert_eq!(step.termination, Some(Termination::Solved));
    assert_eq!(
        post(&format!("{base}/sessions/{id}/step"), json!({"action": 1})).status(),
        409
    );

    // The transcript survives termination, then deletion is terminal.
    let done: TranscriptResponse = http
        .get(format!("{base}/sessions/{id}/transcript"))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(done.steps.len(), 1);
    assert_eq!(done.termination, Some(Termination::Solved));
    assert_eq!(
        http.delete(format!("{base}/sessions/{id}"))
            .send()
            .unwrap()
            .status(),
        204
    );
    assert_eq!(
        http.delete(format!("{base}/sessions/{id}"))
            .send()
            .unwrap()
            .status(),
        404
    );

    // An out-of-bounds action terminates the episode as invalid.
    let created: CreateResponse = post(
        &format!("{base}/sessions"),
        json!({"kind": "guess_num", "mode": "easy", "seed": 3}),
    )
    .json()
    .unwrap();
    let id = created.session_id;
    let step: StepResponse = post(
        &format!("{base}/sessions/{id}/step"),
        json!({"action": 5, "proposed": null}),
    )
    .json()
    .unwrap();
    assert_eq!(step.validity, Validity::Invalid);
    assert!(!step.following, "explicit null proposal grades as defiant");
    assert_eq!(step.termination, Some(Termination::InvalidResponse));
    assert_eq!(
        post(&format!("{base}/sessions/{id}/step"), json!({"action": 5})).status(),
        409
    );
}

fn seqbench(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_seqbench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn expect_ok(output: &std::process::Output, what: &str) {
    assert!(
        output.status.success(),
        "{what} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn binary_round_trip_gen_run_score_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).display().to_string();

    let gen = seqbench(&[
        "gen",
        "--kind",
        "cave_dfs",
        "--mode",
        "easy",
        "--seed",
        "5",
        "--count",
        "12",
        "--out",
        &path("cases.jsonl"),
    ]);
    expect_ok(&gen, "gen");
    let cases_text = std::fs::read_to_string(dir.path().join("cases.jsonl")).unwrap();
    assert_eq!(cases_text.lines().count(), 13, "header line plus 12 cases");

    let run = seqbench(&[
        "run",
        "--cases",
        &path("cases.jsonl"),
        "--agent",
        "noisy:3:0.9",
        "--parallelism",
        "2",
        "--out",
        &path("noisy.jsonl"),
        "--manifest",
        &path("noisy.manifest.json"),
    ]);
    expect_ok(&run, "run");
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("noisy.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["case_count"], 12);
    assert_eq!(manifest["kind"], "cave_dfs");
    assert_eq!(manifest["agent"], "noisy:3:0.9");
    assert!(manifest["transcripts_sha256"].as_str().unwrap().len() == 64);

    // Protocol variants drive the same pipeline.
    let tg = seqbench(&[
        "run",
        "--cases",
        &path("cases.jsonl"),
        "--agent",
        "noisy:3:0.9",
        "--teacher-guided",
        "--parallelism",
        "2",
        "--out",
        &path("tg.jsonl"),
    ]);
    expect_ok(&tg, "teacher-guided run");
    let ice = seqbench(&[
        "run",
        "--cases",
        &path("cases.jsonl"),
        "--agent",
        "oracle",
        "--ice",
        "2",
        "--parallelism",
        "2",
        "--out",
        &path("ice.jsonl"),
    ]);
    expect_ok(&ice, "in-context run");

    for name in ["noisy", "tg", "ice"] {
        let score = seqbench(&[
            "score",
            "--transcripts",
            &path(&format!("{name}.jsonl")),
            "--out",
            &path(&format!("{name}.scores.json")),
            "--csv",
            &path(&format!("{name}.episodes.csv")),
        ]);
        expect_ok(&score, "score");
        let scores: Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(format!("{name}.scores.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(scores["summary"]["episodes"], 12);
        let csv = std::fs::read_to_string(dir.path().join(format!("{name}.episodes.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 13, "header plus one row per episode");
    }
    // Teacher-guided scores carry the per-step adherence curve.
    let tg_scores: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("tg.scores.json")).unwrap(),
    )
    .unwrap();
    assert!(tg_scores["summary"]["psacc_avg"].is_number());
    assert!(tg_scores["summary"]["psacc"].is_array());

    let report = seqbench(&[
        "report",
        "--scores",
        &path("noisy.scores.json"),
        &path("tg.scores.json"),
        &path("ice.scores.json"),
        "--csv",
        &path("report.csv"),
    ]);
    expect_ok(&report, "report");
    let table = String::from_utf8_lossy(&report.stdout);
    assert!(table.contains("cave_dfs"), "table lists the environment:\n{table}");
    assert!(table.contains("teacher_guided"));
    assert!(table.contains("in_context_2"));
    let report_csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(report_csv.lines().count(), 4, "header plus three groups");
}
