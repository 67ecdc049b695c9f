//! Track one learner's knowledge state as answers come in.
//!
//! Real answers and simulated evidence (one virtual correct answer per
//! concept mentioned in conversation) feed the same update.

use agq::ceirt::{
    predict_correct, simulate_evidence, update_knowledge_state, Concept, ConceptSet,
    ItemParameters, KnowledgeState, OptimizerConfig, ResponseRecord,
};

fn main() -> anyhow::Result<()> {
    let concepts = ConceptSet::new(vec![
        Concept {
            id: "eor".into(),
            name: "EOR".into(),
        },
        Concept {
            id: "surfactants".into(),
            name: "surfactants".into(),
        },
    ])?;
    let cfg = OptimizerConfig::knowledge_update();
    let mut theta = KnowledgeState::zeros(concepts.len());
    let mut history: Vec<ResponseRecord> = Vec::new();

    let hard = ItemParameters::new(vec![1.2, 0.0], vec![1.5, 0.0])?;
    println!(
        "p(correct) on a hard EOR item: {:.3}",
        predict_correct(&theta, &hard)?
    );

    history.push(ResponseRecord {
        item_id: "eor-007".into(),
        params: hard.clone(),
        correct: true,
        round: 0,
        simulated: false,
    });
    theta = update_knowledge_state(&theta, &history, &cfg)?;
    println!("after a correct answer:  {:?}", theta.values());

    for round in 1..=5 {
        history.extend(simulate_evidence(
            &["surfactants".into()],
            &concepts,
            &theta,
            round,
        )?);
        theta = update_knowledge_state(&theta, &history, &cfg)?;
        println!("round {round}, surfactants mentioned: {:?}", theta.values());
    }
    println!("p(correct) now: {:.3}", predict_correct(&theta, &hard)?);
    Ok(())
}
