//! Run the session API on a random local port with a scripted model, drive
//! it with a few requests, then shut down.
//!
//! Use `agq serve` for a long-running server.

use std::sync::Arc;

use agq::corpus::load_item_bank;
use agq::gateway::{MockGateway, MockScript};
use agq::session::{router, AppState, SessionConfig, SystemClock};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let bank = load_item_bank(format!("{dir}/fixtures/bank.json").as_ref())?;
    let script: MockScript = serde_json::from_str(&std::fs::read_to_string(format!(
        "{dir}/fixtures/mock_script.json"
    ))?)?;
    let state = AppState::new(
        bank,
        SessionConfig::default(),
        Arc::new(MockGateway::new(script)),
        Arc::new(SystemClock),
    );

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let server = tokio::spawn(async move { axum::serve(listener, router(state)).await });

    let reply = tokio::task::spawn_blocking(move || -> anyhow::Result<Vec<(String, Value)>> {
        let client = reqwest::blocking::Client::new();
        let mut log = Vec::new();
        let created: Value = client.post(format!("{base}/sessions")).send()?.json()?;
        let id = created["session_id"].as_str().unwrap_or_default().to_string();
        log.push(("POST /sessions".into(), created));
        let turn: Value = client
            .post(format!("{base}/sessions/{id}/turns"))
            .json(&json!({ "query": "What is EOR?" }))
            .send()?
            .json()?;
        log.push(("POST /turns".into(), json!({ "branch": turn["branch"], "questions": turn["guiding_questions"].as_array().map(Vec::len) })));
        let state: Value = client.get(format!("{base}/sessions/{id}/state")).send()?.json()?;
        log.push(("GET /state".into(), state));
        let missing = client.get(format!("{base}/sessions/nope/state")).send()?;
        log.push(("GET /sessions/nope/state".into(), json!({ "status": missing.status().as_u16(), "body": missing.json::<Value>()? })));
        Ok(log)
    })
    .await??;

    for (what, body) in reply {
        println!("{what}\n  {body}");
    }
    server.abort();
    Ok(())
}
