use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use super::{GuidanceError, InspiringText, QuestionMode, Result};

/// Prompt text with `{slot}` placeholders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub text: &'static str,
}

/// Tutor prompt; slot `{Knowledge State}`.
pub const TUTOR: PromptTemplate = PromptTemplate {
    name: "tutor",
    text: include_str!("../../templates/tutor.txt"),
};

/// Understanding-biased question prompt for low knowledge states.
pub const QUESTION_LOW: PromptTemplate = PromptTemplate {
    name: "question_low",
    text: include_str!("../../templates/question_low.txt"),
};

/// Application-biased question prompt for high knowledge states.
pub const QUESTION_HIGH: PromptTemplate = PromptTemplate {
    name: "question_high",
    text: include_str!("../../templates/question_high.txt"),
};

/// Chain-of-thought baseline prompt (no slots).
pub const COT: PromptTemplate = PromptTemplate {
    name: "cot",
    text: include_str!("../../templates/cot.txt"),
};

/// Zero-shot baseline prompt; slot `{knowledge state}`.
pub const ZERO_SHOT: PromptTemplate = PromptTemplate {
    name: "zero_shot",
    text: include_str!("../../templates/zero_shot.txt"),
};

fn slot_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z_ ]*)\}").expect("valid regex"))
}

impl PromptTemplate {
    pub fn slots(&self) -> BTreeSet<String> {
        slot_re()
            .captures_iter(self.text)
            .map(|c| c[1].to_string())
            .collect()
    }

    /// Fills every slot. Each slot must receive a value and each value must
    /// name a slot; inserted values are not rescanned for placeholders.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String> {
        let slots = self.slots();
        for (key, _) in values {
            if !slots.contains(*key) {
                return Err(GuidanceError::Template(format!(
                    "template `{}` has no slot `{{{key}}}`",
                    self.name
                )));
            }
        }
        if let Some(missing) = slots.iter().find(|s| !values.iter().any(|(k, _)| k == s)) {
            return Err(GuidanceError::Template(format!(
                "slot `{{{missing}}}` of template `{}` left unfilled",
                self.name
            )));
        }
        Ok(slot_re()
            .replace_all(self.text, |caps: &regex::Captures<'_>| {
                values
                    .iter()
                    .find(|(k, _)| *k == &caps[1])
                    .map(|(_, v)| v.to_string())
                    .unwrap_or_default()
            })
            .into_owned())
    }
}

/// Fragments as they appear in the `{Inspiring_Text}` slot: one per line.
pub fn format_inspiring_text(texts: &[InspiringText]) -> String {
    texts
        .iter()
        .map(|t| t.fragment.trim())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Question-generation prompt for the given mode.
pub fn assemble_guidance_prompt(
    mode: QuestionMode,
    concepts: &[String],
    texts: &[InspiringText],
) -> Result<String> {
    if concepts.is_empty() {
        return Err(GuidanceError::Template(
            "no concepts for {conversation_concepts}".into(),
        ));
    }
    if texts.is_empty() {
        return Err(GuidanceError::Template(
            "no inspiring text for {Inspiring_Text}".into(),
        ));
    }
    let template = match mode {
        QuestionMode::UnderstandingBiased => QUESTION_LOW,
        QuestionMode::ApplicationBiased => QUESTION_HIGH,
    };
    template.render(&[
        ("conversation_concepts", &concepts.join(", ")),
        ("Inspiring_Text", &format_inspiring_text(texts)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(fragment: &str) -> InspiringText {
        InspiringText {
            item_id: "q1".into(),
            fragment: fragment.into(),
            concept_id: "eor".into(),
            difficulty: 0.0,
            suitability: 1.0,
        }
    }

    #[test]
    fn template_slots() {
        assert_eq!(
            TUTOR.slots().into_iter().collect::<Vec<_>>(),
            vec!["Knowledge State"]
        );
        assert_eq!(
            QUESTION_LOW.slots().into_iter().collect::<Vec<_>>(),
            vec!["Inspiring_Text", "conversation_concepts"]
        );
        assert_eq!(QUESTION_HIGH.slots(), QUESTION_LOW.slots());
        assert!(COT.slots().is_empty());
        assert_eq!(
            ZERO_SHOT.slots().into_iter().collect::<Vec<_>>(),
            vec!["knowledge state"]
        );
    }

    #[test]
    fn low_mode_prompt() {
        let p = assemble_guidance_prompt(
            QuestionMode::UnderstandingBiased,
            &["EOR".into(), "surfactants".into()],
            &[
                text("Surfactants lower interfacial tension."),
                text("EOR targets residual oil."),
            ],
        )
        .unwrap();
        assert!(p.contains("clarify fundamental principles, mechanisms, and definitions"));
        assert!(p.contains("knowledge points: EOR, surfactants."));
        assert!(p.contains(
            "following text: Surfactants lower interfacial tension.\nEOR targets residual oil.."
        ));
        assert!(p.contains("propose 5 guiding questions"));
        assert!(!p.contains('{'));
    }

    #[test]
    fn high_mode_prompt() {
        let p = assemble_guidance_prompt(
            QuestionMode::ApplicationBiased,
            &["EOR".into()],
            &[text("x")],
        )
        .unwrap();
        assert!(p.contains("explore practical applications, compare scenarios"));
        assert!(p.contains("ensure the given knowledge points are included"));
    }

    #[test]
    fn missing_inputs_are_template_errors() {
        assert!(matches!(
            assemble_guidance_prompt(QuestionMode::ApplicationBiased, &["EOR".into()], &[]),
            Err(GuidanceError::Template(_))
        ));
        assert!(matches!(
            assemble_guidance_prompt(QuestionMode::ApplicationBiased, &[], &[text("x")]),
            Err(GuidanceError::Template(_))
        ));
    }

    #[test]
    fn render_checks_both_directions() {
        assert!(TUTOR.render(&[]).is_err());
        assert!(TUTOR
            .render(&[("Knowledge State", "x"), ("extra", "y")])
            .is_err());
        let out = ZERO_SHOT
            .render(&[("knowledge state", "{not a slot}")])
            .unwrap();
        assert!(out.contains("weak areas: {not a slot},"));
    }
}
