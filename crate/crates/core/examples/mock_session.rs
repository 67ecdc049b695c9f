//! A full tutoring conversation against a scripted model, saved to disk and
//! restored.

use agq::corpus::load_item_bank;
use agq::gateway::{MockGateway, MockScript};
use agq::session::{
    create_session, persist_session, restore_session, run_turn, Branch, SessionConfig, StepClock,
    TurnContext, TurnOutcome,
};

fn main() -> anyhow::Result<()> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let bank = load_item_bank(format!("{dir}/fixtures/bank.json").as_ref())?;
    let script: MockScript = serde_json::from_str(&std::fs::read_to_string(format!(
        "{dir}/fixtures/mock_script.json"
    ))?)?;
    let gateway = MockGateway::new(script);
    let clock = StepClock::new(1_700_000_000_000, 1_000);

    let config = SessionConfig {
        seed: 42,
        ..SessionConfig::default()
    };
    let mut session = create_session(&bank, None, config, &clock)?;
    let ctx = TurnContext {
        bank: &bank,
        gateway: &gateway,
        clock: &clock,
    };

    for query in [
        "What is EOR?",
        "Tell me about surfactants",
        "And polymers?",
        "exit",
    ] {
        println!("> {query}");
        match run_turn(&mut session, ctx, query)? {
            TurnOutcome::Terminated => println!("(session closed)"),
            TurnOutcome::Turn(t) => {
                println!("{}", t.response);
                let branch = if t.branch == Branch::Low {
                    "foundational"
                } else {
                    "application"
                };
                println!("  touched {:?}, {branch} questions:", t.touched_concepts);
                for q in &t.guiding_questions {
                    println!("  [{:.2}] {}", q.quality, q.text);
                }
                let theta: Vec<String> = t
                    .theta_after
                    .values()
                    .iter()
                    .map(|v| format!("{v:.2}"))
                    .collect();
                println!("  theta = [{}]", theta.join(", "));
            }
        }
    }

    let path = std::env::temp_dir().join(format!("{}.json", session.session_id));
    persist_session(&session, &path)?;
    let back = restore_session(&path)?;
    assert_eq!(back, session);
    println!("saved and restored {}", path.display());
    Ok(())
}
