mod common;

use std::io::Write;
use std::process::{Command, Output, Stdio};

fn agq(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_agq"))
        .args(args)
        .env_remove("AGQ_API_KEY")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn chat_runs_until_exit_and_saves() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("s.json");
    let bank = common::fixture("bank.json");
    let script = common::fixture("mock_script.json");
    let out = agq(
        &[
            "--bank",
            path(&bank),
            "--script",
            path(&script),
            "--seed",
            "42",
            "--out",
            path(&saved),
            "chat",
        ],
        "What is EOR?\n\nexit\n",
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("guiding questions (foundational):"));
    assert!(stdout.contains("1. What does EOR add beyond waterflooding in a mature field? ["));
    let session = agq::session::restore_session(&saved).unwrap();
    assert_eq!(session.transcript.len(), 1);
    assert!(session.terminated);
    assert_eq!(session.session_id, agq::session::session_id_from_seed(42));

    let out = agq(
        &[
            "--bank",
            path(&bank),
            "--script",
            path(&script),
            "chat",
            "--resume",
            path(&saved),
        ],
        "more\n",
    );
    assert!(out.status.success());
    assert!(text(&out.stdout).contains("turn failed"));
}

#[test]
fn usage_and_domain_errors_have_distinct_codes() {
    assert_eq!(agq(&["frobnicate"], "").status.code(), Some(2));
    assert_eq!(
        agq(&["simulate", "--rounds", "x"], "").status.code(),
        Some(2)
    );

    let out = agq(&["chat"], "");
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("--bank is required"));

    let out = agq(&["--bank", "/nonexistent/bank.json", "calibrate"], "");
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("/nonexistent/bank.json"));

    let bank = common::fixture("bank.json");
    let out = agq(
        &["--bank", path(&bank), "--gateway", "live", "chat"],
        "hi\n",
    );
    assert!(text(&out.stdout).contains("AGQ_API_KEY") || text(&out.stderr).contains("AGQ_API_KEY"));
}

#[test]
fn calibrate_writes_a_loadable_bank() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("cal.json");
    let bank = common::fixture("bank.json");
    let out = agq(
        &[
            "--bank",
            path(&bank),
            "--epochs",
            "50",
            "--out",
            path(&out_path),
            "calibrate",
        ],
        "",
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("over 50 epochs"));
    let cal = agq::corpus::load_item_bank(&out_path).unwrap();
    assert_eq!(cal.len(), 25);
    assert_ne!(cal.items[1].params, common::bank().items[1].params);
}

#[test]
fn simulate_ablate_evaluate_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("policy.csv");
    let out = agq(
        &[
            "--out",
            path(&p),
            "simulate",
            "--rounds",
            "5",
            "--seeds",
            "3",
        ],
        "",
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(&p).unwrap();
    assert!(csv.starts_with("policy,seed,round,accuracy,mean_theta\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 3 * 6);

    let a = dir.path().join("ablate.csv");
    let out = agq(
        &[
            "--out",
            path(&a),
            "ablate",
            "--gaps",
            "0:2:0.5",
            "--rounds",
            "3",
            "--seeds",
            "4",
        ],
        "",
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 1 + 5);
    assert_eq!(
        agq(&["--out", path(&a), "ablate", "--gaps", "0:2"], "")
            .status
            .code(),
        Some(1)
    );

    let pairs = dir.path().join("pairs.json");
    std::fs::write(
        &pairs,
        r#"[{"candidate": "a b c d", "references": ["a b c d"]}]"#,
    )
    .unwrap();
    let sim = dir.path().join("sim.csv");
    let out = agq(
        &["--out", path(&sim), "evaluate", "--input", path(&pairs)],
        "",
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(
        std::fs::read_to_string(&sim).unwrap(),
        "index,bleu4,rouge1_f,rouge2_f,rougeL_f\n0,1,1,1,1\n"
    );
}

#[test]
fn ingest_with_scripted_model() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("doc.txt");
    std::fs::write(
        &doc,
        "Abstract: steam injection heats heavy oil. Keywords: steam injection",
    )
    .unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        r#"[{"contains": "key technical concepts", "reply": "Steam injection"},
            {"contains": "verbatim", "reply": "Steam injection heats heavy oil.\nHot oil flows more easily."},
            {"contains": "multiple-choice", "reply": "Question: What does steam do?\nA. Heats oil\nB. Cools oil\nC. Nothing\nD. Freezes\nAnswer: A\nScenario: theory"},
            {"contains": "multiple-choice", "reply": "Question: Why does hot oil flow?\nA. Higher density\nB. Lower viscosity\nC. Salt\nD. Sand\nAnswer: B\nScenario: application"},
            {"contains": "Experiment-related", "reply": "Experiment-related: no"},
            {"contains": "Experiment-related", "reply": "Experiment-related: yes"}]"#,
    )
    .unwrap();
    let bank = dir.path().join("bank.json");
    let out = agq(
        &[
            "--script",
            path(&script),
            "--out",
            path(&bank),
            "ingest",
            "--doc",
            path(&doc),
        ],
        "",
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let b = agq::corpus::load_item_bank(&bank).unwrap();
    assert_eq!(b.items[0].item_id, "steam-injection-001");
    assert_eq!(b.items[0].experiment_related, Some(false));
    assert_eq!(b.items[1].experiment_related, Some(true));
    assert!(!b.items[0].verified);
}
