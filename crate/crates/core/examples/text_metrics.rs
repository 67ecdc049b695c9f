//! BLEU-4 and ROUGE between a generated question and reference questions.

use agq::eval::text_similarity;

fn main() -> anyhow::Result<()> {
    let refs = vec![
        "how do surfactants reduce interfacial tension in trapped oil".to_string(),
        "why do surfactants help recover residual oil".to_string(),
    ];
    for cand in [
        "how do surfactants reduce interfacial tension in trapped oil",
        "how do surfactants lower the interfacial tension of oil",
        "what heats heavy oil during steam injection",
    ] {
        let s = text_similarity(cand, &refs)?;
        println!(
            "bleu4 {:.3}  r1 {:.3}  r2 {:.3}  rL {:.3}  | {cand}",
            s.bleu4, s.rouge1_f, s.rouge2_f, s.rouge_l_f
        );
    }
    Ok(())
}
