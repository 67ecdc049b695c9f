mod common;

use agq::ceirt::KnowledgeState;
use agq::guidance::{
    assemble_guidance_prompt, detect_low_state, format_inspiring_text, score_question,
    select_inspiring_text, select_inspiring_text_in, suitability_score, GuidanceError,
    QualityWeights, QuestionMode, QUESTION_HIGH, QUESTION_LOW,
};

fn theta(v: [f64; 5]) -> KnowledgeState {
    KnowledgeState::new(v.to_vec()).unwrap()
}

#[test]
fn selection_is_ranked_and_scoped() {
    let bank = common::bank();
    let th = theta([0.2, 1.5, -0.3, 0.8, 0.0]);
    let all = select_inspiring_text(&bank, &th, None, 25).unwrap();
    assert_eq!(all.len(), bank.len());
    for w in all.windows(2) {
        assert!(w[0].suitability >= w[1].suitability);
        if w[0].suitability == w[1].suitability {
            assert!(w[0].item_id < w[1].item_id);
        }
    }
    for t in &all {
        let j = bank.concept_set.index_of(&t.concept_id).unwrap();
        let expected = suitability_score(th.values()[j], t.difficulty).unwrap();
        assert_eq!(t.suitability, expected);
    }

    let only = select_inspiring_text(&bank, &th, Some(2), 3).unwrap();
    assert_eq!(only.len(), 3);
    assert!(only.iter().all(|t| t.concept_id == "polymer_flooding"));
    let both = select_inspiring_text_in(&bank, &th, &[0, 4], 50).unwrap();
    assert!(both
        .iter()
        .all(|t| t.concept_id == "eor" || t.concept_id == "co2_flooding"));
    let tagged = bank
        .items
        .iter()
        .filter(|it| {
            it.concept_ids
                .iter()
                .any(|c| c == "eor" || c == "co2_flooding")
        })
        .count();
    assert_eq!(both.len(), tagged);
}

#[test]
fn low_state_drives_prompt_choice() {
    let bank = common::bank();
    let th = theta([2.0, 2.0, 0.4, 2.0, 0.9]);
    let (j, _) = detect_low_state(&th, 1.0).unwrap();
    assert_eq!(j, 2);
    let texts = select_inspiring_text(&bank, &th, Some(j), 3).unwrap();
    let prompt = assemble_guidance_prompt(
        QuestionMode::UnderstandingBiased,
        &["polymer flooding".into()],
        &texts,
    )
    .unwrap();
    let expected = QUESTION_LOW
        .text
        .replace("{conversation_concepts}", "polymer flooding")
        .replace("{Inspiring_Text}", &format_inspiring_text(&texts));
    assert_eq!(prompt, expected);
    assert!(detect_low_state(&theta([2.0; 5]), 1.0).is_none());
}

#[test]
fn high_prompt_lists_every_concept() {
    let bank = common::bank();
    let texts = select_inspiring_text(&bank, &theta([2.0; 5]), None, 3).unwrap();
    let names = bank.concept_set.names();
    let prompt = assemble_guidance_prompt(QuestionMode::ApplicationBiased, &names, &texts).unwrap();
    assert!(prompt.starts_with(&QUESTION_HIGH.text[..40]));
    assert!(prompt.contains(&names.join(", ")));
    assert!(!prompt.contains('{'));
    assert!(matches!(
        assemble_guidance_prompt(QuestionMode::ApplicationBiased, &[], &texts),
        Err(GuidanceError::Template(_))
    ));
}

#[test]
fn quality_prefers_on_topic_questions_for_weak_concepts() {
    let bank = common::bank();
    let w = QualityWeights::default();
    let th = theta([2.0, 0.1, 2.0, 2.0, 2.0]);
    let on = score_question(
        "How do surfactants lower interfacial tension so trapped oil can move?",
        "surfactants",
        &th,
        &bank,
        w,
        QuestionMode::UnderstandingBiased,
    )
    .unwrap();
    let off = score_question(
        "What is it?",
        "surfactants",
        &th,
        &bank,
        w,
        QuestionMode::UnderstandingBiased,
    )
    .unwrap();
    assert!(on.mi > off.mi);
    assert!(on.quality > off.quality);
    assert!((on.align - 0.9).abs() < 1e-12);
    let strong = score_question(
        &on.text,
        "eor",
        &th,
        &bank,
        w,
        QuestionMode::UnderstandingBiased,
    )
    .unwrap();
    assert!(strong.align < on.align);
    assert!(score_question(
        "x",
        "nope",
        &th,
        &bank,
        w,
        QuestionMode::UnderstandingBiased
    )
    .is_err());
}
