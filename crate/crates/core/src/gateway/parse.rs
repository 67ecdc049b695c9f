use std::sync::OnceLock;

use regex::Regex;

use super::{Completion, GatewayError, LlmGateway, Result};
use crate::ceirt::ConceptSet;
use crate::corpus::tokenize;

/// Guiding-question prompts ask for this many questions.
pub const MAX_QUESTIONS: usize = 5;

const EXTRACTION_SYSTEM: &str = "You identify which domain concepts a passage discusses. \
Answer with the matching concept names from the provided list, one per line, spelled exactly \
as listed. Answer with `none` if no concept applies.";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConceptExtraction {
    /// Matched concept ids, in concept-set order.
    pub concept_ids: Vec<String>,
    pub warnings: Vec<String>,
    /// Present when a live model was asked.
    pub exchange: Option<(String, String, Completion)>,
}

fn list_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(?:\(?\d{1,2}\s*[.):]|[-*•]|[Qq]\d{1,2}\s*[.:)])\s*(.*)$")
            .expect("valid regex")
    })
}

/// Drops a trailing plural `s` from tokens longer than three characters.
pub fn fold_plural(token: &str) -> String {
    if token.len() > 3 && token.ends_with('s') && !token.ends_with("ss") {
        token[..token.len() - 1].to_string()
    } else {
        token.to_string()
    }
}

fn folded_tokens(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| fold_plural(t)).collect()
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Offline concept matching: a concept is touched when its name, or its id,
/// appears in the text as a whole-token run after case and plural folding.
fn lexicon_match(response_text: &str, concept_set: &ConceptSet) -> Vec<String> {
    let text = folded_tokens(response_text);
    concept_set
        .iter()
        .filter(|c| {
            contains_run(&text, &folded_tokens(&c.name))
                || contains_run(&text, &folded_tokens(&c.id))
        })
        .map(|c| c.id.clone())
        .collect()
}

/// Concepts touched by a response.
///
/// A live gateway is asked to name them and the reply is mapped onto
/// `concept_set` by exact name; names outside the set are dropped with a
/// warning. Offline gateways use lexicon matching instead. Either way the
/// result is a subset of `concept_set`.
pub fn extract_concepts(
    response_text: &str,
    concept_set: &ConceptSet,
    gateway: &dyn LlmGateway,
) -> Result<ConceptExtraction> {
    if concept_set.is_empty() {
        return Err(GatewayError::Config("concept set is empty".into()));
    }
    if !gateway.is_live() {
        return Ok(ConceptExtraction {
            concept_ids: lexicon_match(response_text, concept_set),
            ..ConceptExtraction::default()
        });
    }

    let names = concept_set.names().join("\n");
    let user = format!("Concepts:\n{names}\n\nPassage:\n{response_text}");
    let completion = gateway.complete(EXTRACTION_SYSTEM, &user)?;
    let mut hit = vec![false; concept_set.len()];
    let mut warnings = Vec::new();
    for line in completion.text.lines() {
        let name = match list_marker().captures(line) {
            Some(c) => c[1].trim().to_string(),
            None => line.trim().to_string(),
        };
        if name.is_empty() || name.eq_ignore_ascii_case("none") {
            continue;
        }
        match concept_set.iter().position(|c| c.name == name) {
            Some(j) => hit[j] = true,
            None => {
                let w = format!("model named unknown concept `{name}`; dropped");
                tracing::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    let concept_ids = concept_set
        .iter()
        .zip(&hit)
        .filter(|(_, h)| **h)
        .map(|(c, _)| c.id.clone())
        .collect();
    Ok(ConceptExtraction {
        concept_ids,
        warnings,
        exchange: Some((EXTRACTION_SYSTEM.to_string(), user, completion)),
    })
}

/// Pulls up to five questions out of a numbered or bulleted reply.
pub fn parse_guiding_questions(reply: &str) -> Result<Vec<String>> {
    let questions: Vec<String> = reply
        .lines()
        .filter_map(|line| list_marker().captures(line))
        .map(|c| {
            c[1].trim()
                .trim_matches(|ch| matches!(ch, '"' | '“' | '”'))
                .trim()
                .to_string()
        })
        .filter(|q| !q.is_empty())
        .take(MAX_QUESTIONS)
        .collect();
    if questions.is_empty() {
        return Err(GatewayError::Parse {
            reason: "no numbered or bulleted questions found".into(),
            raw: reply.to_string(),
        });
    }
    Ok(questions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ceirt::Concept;
    use crate::gateway::{MockGateway, MockScript};

    fn set() -> ConceptSet {
        ConceptSet::new(vec![
            Concept {
                id: "eor".into(),
                name: "Enhanced Oil Recovery".into(),
            },
            Concept {
                id: "surfactants".into(),
                name: "surfactants".into(),
            },
            Concept {
                id: "steam_injection".into(),
                name: "steam injection".into(),
            },
        ])
        .unwrap()
    }

    struct Live(MockGateway);

    impl LlmGateway for Live {
        fn complete(&self, s: &str, u: &str) -> Result<Completion> {
            self.0.complete(s, u)
        }
        fn is_live(&self) -> bool {
            true
        }
    }

    #[test]
    fn offline_singular_matches_plural_name() {
        let gw = MockGateway::new(MockScript::new());
        let got =
            extract_concepts("Add a surfactant to cut interfacial tension.", &set(), &gw).unwrap();
        assert_eq!(got.concept_ids, vec!["surfactants".to_string()]);
        assert_eq!(gw.calls().len(), 0);
    }

    #[test]
    fn offline_matches_id_and_multiword_name() {
        let gw = MockGateway::new(MockScript::new());
        let got = extract_concepts("EOR often relies on Steam Injection.", &set(), &gw).unwrap();
        assert_eq!(
            got.concept_ids,
            vec!["eor".to_string(), "steam_injection".to_string()]
        );
        let none = extract_concepts("Nothing relevant here.", &set(), &gw).unwrap();
        assert!(none.concept_ids.is_empty());
        // a partial name is not enough
        let partial = extract_concepts("The steam was hot.", &set(), &gw).unwrap();
        assert!(partial.concept_ids.is_empty());
    }

    #[test]
    fn live_reply_is_mapped_and_unknown_dropped() {
        let gw = Live(MockGateway::new(
            MockScript::new().reply("1. steam injection\n2. Gas lift\n"),
        ));
        let got = extract_concepts("irrelevant", &set(), &gw).unwrap();
        assert_eq!(got.concept_ids, vec!["steam_injection".to_string()]);
        assert_eq!(got.warnings.len(), 1);
        assert!(got.warnings[0].contains("Gas lift"));
        assert!(got.exchange.is_some());
    }

    #[test]
    fn numbered_list() {
        let q = parse_guiding_questions("1. What is X?\n2. How does Y work?").unwrap();
        assert_eq!(q, vec!["What is X?", "How does Y work?"]);
    }

    #[test]
    fn caps_at_five_and_handles_bullets() {
        let reply: String = (1..=7).map(|i| format!("{i}) Question {i}?\n")).collect();
        let q = parse_guiding_questions(&reply).unwrap();
        assert_eq!(q.len(), 5);
        assert_eq!(q[4], "Question 5?");
        let q = parse_guiding_questions("Here you go:\n- \"Why A?\"\n* Why B?\n-   \n").unwrap();
        assert_eq!(q, vec!["Why A?", "Why B?"]);
    }

    #[test]
    fn prose_is_a_parse_error() {
        match parse_guiding_questions("Just some prose without a list.") {
            Err(GatewayError::Parse { raw, .. }) => assert!(raw.starts_with("Just")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
