//! LLM-assisted dataset construction: concepts from documents, context
//! sentences per concept, one four-option item per sentence, and an
//! experiment-specific filter flag. Everything produced here is unverified.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::{ConceptEntry, CorpusError, ItemBank, ItemDraft, Scenario};
use crate::gateway::{GatewayError, LlmGateway};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Concepts,
    Sentences,
    QaPairs,
    Filter,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Concepts => "concepts",
            Stage::Sentences => "sentences",
            Stage::QaPairs => "qa-pairs",
            Stage::Filter => "filter",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage} stage failed after {attempts} attempt(s): {source}")]
    Gateway {
        stage: Stage,
        attempts: u32,
        #[source]
        source: GatewayError,
    },
    #[error("{stage} stage could not parse model output: {reason}")]
    Parse {
        stage: Stage,
        reason: String,
        raw: String,
    },
    #[error("invalid pipeline input: {0}")]
    Argument(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// In-context examples for the experiment-specific filter.
pub const FILTER_EXAMPLES: [(&str, bool); 6] = [
    ("In chemical flooding technology, which additive can significantly improve the displacement efficiency of the formation?", false),
    ("In the chemical flooding technology of oil fields, which method does not achieve improved displacement efficiency by adjusting the capillary number?", false),
    ("In chemical flooding in oil fields, which driving method has sufficient formulation flexibility to cope with the diversity of geology and reservoirs?", false),
    ("How does Daqing Oilfield distinguish and handle different types of oil layers when implementing weak alkali ternary composite flooding?", true),
    ("In the Upper Wuerhe Formation glutenite reservoir of the Mahu Well Area, what impact might 'water sensitivity damage' have on the exploitation of the reservoir?", true),
    ("In the on-site chemical flooding test of Daqing Oilfield, how many percentage points higher is the surfactant adsorption loss in type III oil layers compared to type II oil layers?", true),
];

const CONCEPT_PROMPT: &str = "You are building a domain question bank. Read the documents below \
(abstracts and keywords are the most useful parts) and list the key technical concepts they cover. \
Output one concept name per line and nothing else.";

const SENTENCE_PROMPT: &str = "Copy, verbatim, every sentence from the documents below that \
explains or uses the concept `{concept}`. Output one sentence per line and nothing else. \
Output `none` if no sentence qualifies.";

const QA_PROMPT: &str = "Write one multiple-choice question about the concept `{concept}` that \
can be answered from the sentence below. Use exactly this layout:\n\
Question: <question>\nA. <option>\nB. <option>\nC. <option>\nD. <option>\nAnswer: <letter>\n\
Scenario: <theory or application>";

const FILTER_PROMPT: &str = "Decide whether a question depends on a specific experiment, field \
test or named site. Answer in the form `Experiment-related: yes` or `Experiment-related: no`.";

/// Outputs of the stages that ran.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetArtifacts {
    pub concepts: Vec<ConceptEntry>,
    pub items: Vec<ItemDraft>,
    pub completed: Vec<Stage>,
}

impl DatasetArtifacts {
    /// Validates the generated items into a bank.
    pub fn into_bank(self) -> Result<ItemBank, PipelineError> {
        Ok(ItemBank::new(self.concepts, self.items, Vec::new())?)
    }
}

fn call(
    gateway: &dyn LlmGateway,
    stage: Stage,
    system: &str,
    user: &str,
) -> Result<String, PipelineError> {
    gateway
        .complete(system, user)
        .map(|c| c.text)
        .map_err(|source| PipelineError::Gateway {
            stage,
            attempts: match &source {
                GatewayError::Exhausted { attempts, .. } => *attempts,
                _ => 1,
            },
            source,
        })
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d{1,3}\s*[.):]|[-*•])\s*").expect("valid regex"))
}

fn list_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| marker().replace(l, "").trim().to_string())
        .filter(|l| !l.is_empty() && !l.eq_ignore_ascii_case("none"))
        .collect()
}

fn slug(name: &str) -> String {
    let mut out = String::new();
    for tok in super::tokenize(name) {
        if !out.is_empty() {
            out.push('-');
        }
        out.push_str(&tok);
    }
    out
}

fn parse_qa(raw: &str) -> Result<(String, Vec<String>, i64, Scenario), String> {
    let mut question = None;
    let mut options: [Option<String>; 4] = Default::default();
    let mut answer = None;
    let mut scenario = Scenario::Unlabeled;
    for line in raw.lines().map(str::trim) {
        let lower = line.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("question:") {
            question = Some(line[line.len() - rest.len()..].trim().to_string());
        } else if let Some(rest) = lower.strip_prefix("answer:") {
            answer = rest
                .trim()
                .chars()
                .next()
                .and_then(|c| "abcd".find(c))
                .map(|i| i as i64);
        } else if let Some(rest) = lower.strip_prefix("scenario:") {
            scenario = match rest.trim() {
                s if s.starts_with("theory") || s.starts_with("understanding") => Scenario::Theory,
                s if s.starts_with("application") => Scenario::Application,
                _ => Scenario::Unlabeled,
            };
        } else if line.len() > 2 {
            let mut chars = line.chars();
            let letter = chars.next().map(|c| c.to_ascii_lowercase());
            let sep = chars.next();
            if let (Some(l), Some('.' | ')' | ':')) = (letter, sep) {
                if let Some(i) = "abcd".find(l) {
                    options[i] = Some(line[2..].trim().to_string());
                }
            }
        }
    }
    let question = question.ok_or("missing `Question:` line")?;
    let options: Vec<String> = options
        .into_iter()
        .enumerate()
        .map(|(i, o)| o.ok_or(format!("missing option {}", ["A", "B", "C", "D"][i])))
        .collect::<Result<_, _>>()?;
    let answer = answer.ok_or("missing or invalid `Answer:` line")?;
    Ok((question, options, answer, scenario))
}

/// Reads `Experiment-related: yes/no` (or a bare yes/no) from a reply.
pub fn parse_experiment_flag(raw: &str) -> Option<bool> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?i)experiment[- ]related\W*(yes|no)\b").expect("valid regex")
    });
    let word = match re.captures(raw) {
        Some(c) => c[1].to_ascii_lowercase(),
        None => raw
            .trim()
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_ascii_lowercase(),
    };
    match word.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

fn filter_system_prompt() -> String {
    let mut s = String::from(FILTER_PROMPT);
    s.push_str("\n\nExamples:\n");
    for (q, flag) in FILTER_EXAMPLES {
        s.push_str(&format!(
            "\nQuestion: {q}\nExperiment-related: {}\n",
            if flag { "yes" } else { "no" }
        ));
    }
    s
}

/// Runs the pipeline stages in order, stopping after `until`.
pub fn generate_dataset(
    documents: &[String],
    gateway: &dyn LlmGateway,
    until: Stage,
) -> Result<DatasetArtifacts, PipelineError> {
    if documents.iter().all(|d| d.trim().is_empty()) {
        return Err(PipelineError::Argument("no documents".into()));
    }
    let corpus = documents.join("\n\n---\n\n");
    let mut out = DatasetArtifacts::default();

    let raw = call(gateway, Stage::Concepts, CONCEPT_PROMPT, &corpus)?;
    for name in list_lines(&raw) {
        let id = slug(&name);
        if id.is_empty() || out.concepts.iter().any(|c| c.id == id) {
            continue;
        }
        out.concepts.push(ConceptEntry {
            id,
            name,
            sentences: Vec::new(),
        });
    }
    if out.concepts.is_empty() {
        return Err(PipelineError::Parse {
            stage: Stage::Concepts,
            reason: "no concept names in reply".into(),
            raw,
        });
    }
    out.completed.push(Stage::Concepts);
    if until == Stage::Concepts {
        return Ok(out);
    }

    for concept in &mut out.concepts {
        let system = SENTENCE_PROMPT.replace("{concept}", &concept.name);
        let raw = call(gateway, Stage::Sentences, &system, &corpus)?;
        concept.sentences = list_lines(&raw);
    }
    out.completed.push(Stage::Sentences);
    if until == Stage::Sentences {
        return Ok(out);
    }

    for concept in &out.concepts {
        for (m, sentence) in concept.sentences.iter().enumerate() {
            let system = QA_PROMPT.replace("{concept}", &concept.name);
            let user = format!("Sentence: {sentence}");
            let raw = call(gateway, Stage::QaPairs, &system, &user)?;
            let (question, options, answer_index, scenario) =
                parse_qa(&raw).map_err(|reason| PipelineError::Parse {
                    stage: Stage::QaPairs,
                    reason,
                    raw: raw.clone(),
                })?;
            out.items.push(ItemDraft {
                item_id: format!("{}-{:03}", concept.id, m + 1),
                question,
                options,
                answer_index,
                concept_ids: vec![concept.id.clone()],
                a: None,
                b: None,
                scenario,
                source_sentence: sentence.clone(),
                verified: false,
                experiment_related: None,
            });
        }
    }
    out.completed.push(Stage::QaPairs);
    if until == Stage::QaPairs {
        return Ok(out);
    }

    let system = filter_system_prompt();
    for item in &mut out.items {
        let user = format!("Question: {}\nExperiment-related:", item.question);
        let raw = call(gateway, Stage::Filter, &system, &user)?;
        let flag = parse_experiment_flag(&raw).ok_or_else(|| PipelineError::Parse {
            stage: Stage::Filter,
            reason: "expected yes or no".into(),
            raw: raw.clone(),
        })?;
        item.experiment_related = Some(flag);
    }
    out.completed.push(Stage::Filter);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockGateway, MockScript};

    const DOC: &str = "Abstract: surfactant flooding lowers interfacial tension. Keywords: surfactants, polymer flooding.";

    #[test]
    fn concept_stage_echoes_script() {
        let gw = MockGateway::new(MockScript::new().reply("1. Surfactants\n2. Polymer flooding\n"));
        let out = generate_dataset(&[DOC.into()], &gw, Stage::Concepts).unwrap();
        assert_eq!(out.concepts.len(), 2);
        assert_eq!(out.concepts[1].id, "polymer-flooding");
        assert_eq!(out.completed, vec![Stage::Concepts]);
    }

    #[test]
    fn qa_stage_builds_four_option_item() {
        let script = MockScript::new()
            .reply("Surfactants")
            .reply("Field data showed high surfactant adsorption loss in low-permeability layers.")
            .reply(
                "Question: What raises surfactant adsorption loss?\nA. Low permeability\nB. High salinity only\n\
                 C. Steam\nD. Polymer\nAnswer: A\nScenario: theory",
            );
        let gw = MockGateway::new(script);
        let out = generate_dataset(&[DOC.into()], &gw, Stage::QaPairs).unwrap();
        assert_eq!(out.items.len(), 1);
        let item = &out.items[0];
        assert_eq!(item.options.len(), 4);
        assert_eq!(item.answer_index, 0);
        assert_eq!(item.scenario, Scenario::Theory);
        assert!(!item.verified);
        assert!(item.source_sentence.contains("surfactant adsorption loss"));
    }

    #[test]
    fn filter_flags_field_test_question() {
        let daqing = FILTER_EXAMPLES[5].0;
        let script = MockScript::new()
            .reply("Surfactants")
            .reply("Surfactant adsorption loss was measured on site.")
            .reply(format!(
                "Question: {daqing}\nA. 1\nB. 2\nC. 3\nD. 4\nAnswer: B\nScenario: application"
            ))
            .when_contains("Experiment-related: yes", "Experiment-related: **yes**");
        let gw = MockGateway::new(script);
        let out = generate_dataset(&[DOC.into()], &gw, Stage::Filter).unwrap();
        assert_eq!(out.items[0].experiment_related, Some(true));
        assert_eq!(out.items[0].question, daqing);
        let calls = gw.calls();
        let filter_call = calls.last().unwrap();
        for (q, _) in FILTER_EXAMPLES {
            assert!(filter_call.system_prompt.contains(q));
        }
    }

    #[test]
    fn gateway_failure_reports_stage_and_attempts() {
        let gw = MockGateway::new(
            MockScript::new().fail_when_contains("key technical concepts", "timeout"),
        );
        match generate_dataset(&[DOC.into()], &gw, Stage::Filter) {
            Err(PipelineError::Gateway {
                stage, attempts, ..
            }) => {
                assert_eq!(stage, Stage::Concepts);
                assert_eq!(attempts, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_qa_keeps_raw_text() {
        let script = MockScript::new()
            .reply("Surfactants")
            .reply("One sentence.")
            .reply("I cannot do that.");
        let gw = MockGateway::new(script);
        match generate_dataset(&[DOC.into()], &gw, Stage::QaPairs) {
            Err(PipelineError::Parse { stage, raw, .. }) => {
                assert_eq!(stage, Stage::QaPairs);
                assert_eq!(raw, "I cannot do that.");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn experiment_flag_parsing() {
        assert_eq!(parse_experiment_flag("Experiment-related: yes"), Some(true));
        assert_eq!(
            parse_experiment_flag("**Experiment-related:** **no**"),
            Some(false)
        );
        assert_eq!(parse_experiment_flag("Yes."), Some(true));
        assert_eq!(parse_experiment_flag("maybe"), None);
    }

    #[test]
    fn empty_documents_rejected() {
        let gw = MockGateway::new(MockScript::new());
        assert!(matches!(
            generate_dataset(&["  ".into()], &gw, Stage::Concepts),
            Err(PipelineError::Argument(_))
        ));
    }
}
