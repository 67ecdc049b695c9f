//! Pick corpus fragments pitched about one unit away from the learner and
//! fill the question-generation prompt with them.

use agq::ceirt::KnowledgeState;
use agq::corpus::load_item_bank;
use agq::guidance::{
    assemble_guidance_prompt, detect_low_state, select_inspiring_text, suitability_score,
    QuestionMode,
};

fn main() -> anyhow::Result<()> {
    let bank = load_item_bank(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/bank.json").as_ref())?;

    for gap in [0.0, 0.5, 1.0, 1.5, 3.0] {
        println!(
            "gap {gap:.1}: suitability {:.3}",
            suitability_score(0.0, gap)?
        );
    }

    let theta = KnowledgeState::new(vec![1.8, 0.4, 1.5, 2.2, 1.1])?;
    let (mode, focus) = match detect_low_state(&theta, 1.0) {
        Some((j, t)) => {
            println!(
                "low concept: {} (theta {t:.2})",
                bank.concept_set.names()[j]
            );
            (QuestionMode::UnderstandingBiased, Some(j))
        }
        None => (QuestionMode::ApplicationBiased, None),
    };

    let texts = select_inspiring_text(&bank, &theta, focus, 3)?;
    for t in &texts {
        println!(
            "{:<16} b = {:+.2}  S = {:.3}  {}",
            t.item_id, t.difficulty, t.suitability, t.fragment
        );
    }

    let names: Vec<String> = texts
        .iter()
        .filter_map(|t| bank.concept_entry(&t.concept_id).map(|c| c.name.clone()))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    println!("\n{}", assemble_guidance_prompt(mode, &names, &texts)?);
    Ok(())
}
