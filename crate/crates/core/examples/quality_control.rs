//! Score candidate guiding questions and drop the weak ones.

use agq::ceirt::KnowledgeState;
use agq::corpus::load_item_bank;
use agq::gateway::parse_guiding_questions;
use agq::guidance::{
    filter_questions, QualityScorer, QualityWeights, QuestionMode, DEFAULT_STOPWORDS,
};

const REPLY: &str = "Here are some questions:
1. How do surfactants lower interfacial tension between trapped oil and brine?
2. Why does surfactant adsorption on rock reduce recovery?
3. What is it?
4. How would a field team choose a surfactant for a high salinity reservoir?";

fn main() -> anyhow::Result<()> {
    let bank = load_item_bank(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/bank.json").as_ref())?;
    let theta = KnowledgeState::new(vec![0.9, 0.5, 0.5, 0.5, 0.5])?;
    let scorer = QualityScorer::new(&bank, QualityWeights::default(), DEFAULT_STOPWORDS);

    let mut scored = Vec::new();
    for q in parse_guiding_questions(REPLY)? {
        scored.push(scorer.score(&q, "surfactants", &theta, QuestionMode::UnderstandingBiased)?);
    }
    let (kept, dropped) = filter_questions(scored, 0.3);

    println!("{:>5} {:>5} {:>5} {:>5}", "align", "mi", "cmplx", "q");
    for (tag, qs) in [("keep", &kept), ("drop", &dropped)] {
        for q in qs {
            println!(
                "{:>5.2} {:>5.2} {:>5.2} {:>5.2}  {tag}: {}",
                q.align, q.mi, q.complexity, q.quality, q.text
            );
        }
    }

    // Weights must be nonnegative and sum to one.
    assert!(QualityWeights::new(0.6, 0.6, -0.2).is_err());
    Ok(())
}
