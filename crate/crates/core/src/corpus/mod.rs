//! Item bank: concepts with their context sentences, four-option items with
//! calibrated parameters, and the corpus statistics the quality scorer needs.

mod pipeline;
mod stats;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ceirt::{
    CeirtError, Concept, ConceptSet, ItemParameters, ItemSpec, Observation, ResponseMatrix,
};
use crate::rng;

pub use pipeline::{
    generate_dataset, parse_experiment_flag, DatasetArtifacts, PipelineError, Stage,
    FILTER_EXAMPLES,
};
pub use stats::{compute_corpus_stats, tokenize, CorpusStats};

/// Seed of the label-keyed streams that fill in missing `a`/`b` at load time.
pub const DEFAULT_PARAM_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed item bank at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("item `{item_id}`: invalid `{field}`: {message}")]
    Validation {
        item_id: String,
        field: &'static str,
        message: String,
    },
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("degenerate corpus: all questions have {0} tokens")]
    Degenerate(usize),
    #[error(transparent)]
    Model(#[from] CeirtError),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// A concept and its context sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptEntry {
    pub id: String,
    pub name: String,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Theory,
    Application,
    Unlabeled,
}

impl Scenario {
    /// Difficulty offset applied before calibration.
    pub fn difficulty_offset(self) -> f64 {
        match self {
            Scenario::Theory => -0.5,
            Scenario::Application => 0.5,
            Scenario::Unlabeled => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedItem {
    pub item_id: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
    pub concept_ids: Vec<String>,
    pub params: ItemParameters,
    pub scenario: Scenario,
    pub source_sentence: String,
    pub verified: bool,
    pub experiment_related: Option<bool>,
}

/// One logged answer from a real user, used for calibration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedResponse {
    pub user: String,
    pub item: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemBank {
    pub concept_set: ConceptSet,
    pub lexicon: Vec<ConceptEntry>,
    pub items: Vec<CalibratedItem>,
    pub stats: CorpusStats,
    pub responses: Vec<LoggedResponse>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankFile {
    concepts: Vec<ConceptEntry>,
    items: Vec<ItemRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    responses: Vec<LoggedResponse>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemRecord {
    id: String,
    question: String,
    options: Vec<String>,
    answer_index: i64,
    concepts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    scenario: Scenario,
    source_sentence: String,
    verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    experiment_related: Option<bool>,
}

/// Unvalidated item as produced by hand or by the dataset pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemDraft {
    pub item_id: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: i64,
    pub concept_ids: Vec<String>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub scenario: Scenario,
    pub source_sentence: String,
    pub verified: bool,
    pub experiment_related: Option<bool>,
}

impl From<ItemRecord> for ItemDraft {
    fn from(r: ItemRecord) -> Self {
        Self {
            item_id: r.id,
            question: r.question,
            options: r.options,
            answer_index: r.answer_index,
            concept_ids: r.concepts,
            a: r.a,
            b: r.b,
            scenario: r.scenario,
            source_sentence: r.source_sentence,
            verified: r.verified,
            experiment_related: r.experiment_related,
        }
    }
}

impl From<&CalibratedItem> for ItemRecord {
    fn from(item: &CalibratedItem) -> Self {
        Self {
            id: item.item_id.clone(),
            question: item.question.clone(),
            options: item.options.clone(),
            answer_index: item.answer_index as i64,
            concepts: item.concept_ids.clone(),
            a: Some(item.params.a.clone()),
            b: Some(item.params.b.clone()),
            scenario: item.scenario,
            source_sentence: item.source_sentence.clone(),
            verified: item.verified,
            experiment_related: item.experiment_related,
        }
    }
}

fn invalid(item_id: &str, field: &'static str, message: impl Into<String>) -> CorpusError {
    CorpusError::Validation {
        item_id: item_id.to_string(),
        field,
        message: message.into(),
    }
}

fn validate_item(draft: ItemDraft, concept_set: &ConceptSet) -> Result<CalibratedItem> {
    let id = draft.item_id.as_str();
    if id.trim().is_empty() {
        return Err(invalid(id, "id", "must not be empty"));
    }
    if draft.question.trim().is_empty() {
        return Err(invalid(id, "question", "must not be empty"));
    }
    if draft.options.len() != 4 {
        return Err(invalid(
            id,
            "options",
            format!("expected exactly 4 options, found {}", draft.options.len()),
        ));
    }
    for (i, opt) in draft.options.iter().enumerate() {
        if draft.options[..i].contains(opt) {
            return Err(invalid(id, "options", format!("duplicate option `{opt}`")));
        }
    }
    if !(0..4).contains(&draft.answer_index) {
        return Err(invalid(
            id,
            "answer_index",
            format!("{} is outside 0..=3", draft.answer_index),
        ));
    }
    if draft.concept_ids.is_empty() {
        return Err(invalid(id, "concepts", "at least one concept is required"));
    }
    let mut tagged = Vec::with_capacity(draft.concept_ids.len());
    for cid in &draft.concept_ids {
        let j = concept_set.index_of(cid).ok_or_else(|| {
            CorpusError::Conflict(format!("item `{id}` references unknown concept `{cid}`"))
        })?;
        if tagged.contains(&j) {
            return Err(invalid(
                id,
                "concepts",
                format!("concept `{cid}` listed twice"),
            ));
        }
        tagged.push(j);
    }
    let k = concept_set.len();
    let params = match (draft.a, draft.b) {
        (Some(a), Some(b)) => {
            if a.len() != k {
                return Err(invalid(
                    id,
                    "a",
                    format!("expected {k} entries, found {}", a.len()),
                ));
            }
            if b.len() != k {
                return Err(invalid(
                    id,
                    "b",
                    format!("expected {k} entries, found {}", b.len()),
                ));
            }
            if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid(id, "a", "entries must be finite and >= 0"));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(invalid(id, "b", "entries must be finite"));
            }
            let params = ItemParameters { a, b };
            if !params.is_assessable() {
                tracing::warn!(
                    "item `{id}` has no positive discrimination; it cannot separate learners"
                );
            }
            params
        }
        (None, None) => {
            let mut r = rng::stream(DEFAULT_PARAM_SEED, &format!("item:{id}"));
            ItemParameters::initial(k, &tagged, draft.scenario.difficulty_offset(), &mut r)
        }
        (Some(_), None) => return Err(invalid(id, "b", "`a` given without `b`")),
        (None, Some(_)) => return Err(invalid(id, "a", "`b` given without `a`")),
    };
    Ok(CalibratedItem {
        item_id: draft.item_id,
        question: draft.question,
        options: draft.options,
        answer_index: draft.answer_index as usize,
        concept_ids: draft.concept_ids,
        params,
        scenario: draft.scenario,
        source_sentence: draft.source_sentence,
        verified: draft.verified,
        experiment_related: draft.experiment_related,
    })
}

impl ItemBank {
    /// Validates everything and derives the corpus statistics.
    pub fn new(
        lexicon: Vec<ConceptEntry>,
        items: Vec<ItemDraft>,
        responses: Vec<LoggedResponse>,
    ) -> Result<Self> {
        for (i, c) in lexicon.iter().enumerate() {
            if lexicon[..i].iter().any(|o| o.id == c.id) {
                return Err(CorpusError::Conflict(format!(
                    "duplicate concept id `{}`",
                    c.id
                )));
            }
        }
        let concept_set = ConceptSet::new(
            lexicon
                .iter()
                .map(|c| Concept {
                    id: c.id.clone(),
                    name: c.name.clone(),
                })
                .collect(),
        )?;
        let mut validated: Vec<CalibratedItem> = Vec::with_capacity(items.len());
        for draft in items {
            if validated.iter().any(|it| it.item_id == draft.item_id) {
                return Err(CorpusError::Conflict(format!(
                    "duplicate item id `{}`",
                    draft.item_id
                )));
            }
            validated.push(validate_item(draft, &concept_set)?);
        }
        for r in &responses {
            if !validated.iter().any(|it| it.item_id == r.item) {
                return Err(CorpusError::Conflict(format!(
                    "response from `{}` references unknown item `{}`",
                    r.user, r.item
                )));
            }
        }
        let stats = compute_corpus_stats(&validated)?;
        Ok(Self {
            concept_set,
            lexicon,
            items: validated,
            stats,
            responses,
        })
    }

    pub fn k(&self) -> usize {
        self.concept_set.len()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: &str) -> Option<&CalibratedItem> {
        self.items.iter().find(|it| it.item_id == id)
    }

    pub fn concept_entry(&self, id: &str) -> Option<&ConceptEntry> {
        self.lexicon.iter().find(|c| c.id == id)
    }

    /// Concept indices an item is tagged with, in tag order.
    pub fn tagged_indices(&self, item: &CalibratedItem) -> Vec<usize> {
        item.concept_ids
            .iter()
            .filter_map(|c| self.concept_set.index_of(c))
            .collect()
    }

    /// Calibration input built from the logged responses.
    pub fn response_matrix(&self) -> Result<ResponseMatrix> {
        if self.responses.is_empty() {
            return Err(CorpusError::Precondition(
                "item bank carries no responses".into(),
            ));
        }
        let mut users: Vec<String> = Vec::new();
        let mut observations = Vec::with_capacity(self.responses.len());
        for r in &self.responses {
            let user = match users.iter().position(|u| *u == r.user) {
                Some(u) => u,
                None => {
                    users.push(r.user.clone());
                    users.len() - 1
                }
            };
            let item = self
                .items
                .iter()
                .position(|it| it.item_id == r.item)
                .ok_or_else(|| CorpusError::Conflict(format!("unknown item `{}`", r.item)))?;
            observations.push(Observation {
                user,
                item,
                correct: r.correct,
            });
        }
        Ok(ResponseMatrix {
            k: self.k(),
            users,
            items: self
                .items
                .iter()
                .map(|it| ItemSpec {
                    id: it.item_id.clone(),
                    concepts: self.tagged_indices(it),
                })
                .collect(),
            observations,
        })
    }

    /// Replaces item parameters in item order.
    pub fn set_params(&mut self, params: Vec<ItemParameters>) -> Result<()> {
        if params.len() != self.items.len() {
            return Err(CorpusError::Precondition(format!(
                "expected {} parameter sets, got {}",
                self.items.len(),
                params.len()
            )));
        }
        for (item, p) in self.items.iter_mut().zip(params) {
            p.validate()?;
            item.params = p;
        }
        Ok(())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: BankFile =
            serde_path_to_error::deserialize(de).map_err(|e| CorpusError::Parse {
                path: e.path().to_string(),
                message: format!("{} ({origin})", e.inner()),
            })?;
        Self::new(
            file.concepts,
            file.items.into_iter().map(ItemDraft::from).collect(),
            file.responses,
        )
    }

    pub fn to_json(&self) -> String {
        let file = BankFile {
            concepts: self.lexicon.clone(),
            items: self.items.iter().map(ItemRecord::from).collect(),
            responses: self.responses.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("bank serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Reads, validates and indexes an item-bank JSON file.
pub fn load_item_bank(path: &Path) -> Result<ItemBank> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ItemBank::from_json(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon() -> Vec<ConceptEntry> {
        vec![
            ConceptEntry {
                id: "eor".into(),
                name: "EOR".into(),
                sentences: vec!["EOR raises recovery.".into()],
            },
            ConceptEntry {
                id: "polymer".into(),
                name: "polymer flooding".into(),
                sentences: vec!["Polymers thicken water.".into()],
            },
        ]
    }

    fn draft(id: &str, question: &str) -> ItemDraft {
        ItemDraft {
            item_id: id.into(),
            question: question.into(),
            options: vec!["A".into(), "B".into(), "C".into(), "D".into()],
            answer_index: 1,
            concept_ids: vec!["eor".into()],
            a: None,
            b: None,
            scenario: Scenario::Theory,
            source_sentence: "EOR raises recovery.".into(),
            verified: false,
            experiment_related: None,
        }
    }

    #[test]
    fn defaults_follow_scenario_offset() {
        let mut app = draft(
            "q2",
            "How is polymer flooding applied in heavy oil reservoirs?",
        );
        app.scenario = Scenario::Application;
        app.concept_ids = vec!["polymer".into()];
        let bank =
            ItemBank::new(lexicon(), vec![draft("q1", "What is EOR?"), app], vec![]).unwrap();
        let q1 = &bank.items[0].params;
        assert_eq!(q1.a, vec![1.0, 0.0]);
        assert!((q1.b[0] + 0.5).abs() < 0.5 && q1.b[1] == 0.0);
        let q2 = &bank.items[1].params;
        assert_eq!(q2.a, vec![0.0, 1.0]);
        assert!((q2.b[1] - 0.5).abs() < 0.5);
    }

    #[test]
    fn three_options_cites_options_field() {
        let mut d = draft("q1", "What is EOR?");
        d.options.pop();
        let err = ItemBank::new(
            lexicon(),
            vec![d, draft("q2", "Why use polymers at all?")],
            vec![],
        )
        .unwrap_err();
        match err {
            CorpusError::Validation { field, item_id, .. } => {
                assert_eq!(field, "options");
                assert_eq!(item_id, "q1");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_concept_and_duplicates_conflict() {
        let mut d = draft("q1", "What is EOR?");
        d.concept_ids = vec!["gas".into()];
        assert!(matches!(
            ItemBank::new(lexicon(), vec![d], vec![]),
            Err(CorpusError::Conflict(_))
        ));
        let dup = vec![
            draft("q1", "What is EOR?"),
            draft("q1", "What is EOR really?"),
        ];
        assert!(matches!(
            ItemBank::new(lexicon(), dup, vec![]),
            Err(CorpusError::Conflict(_))
        ));
    }

    #[test]
    fn answer_index_and_option_rules() {
        let mut d = draft("q1", "What is EOR?");
        d.answer_index = 4;
        assert!(matches!(
            ItemBank::new(lexicon(), vec![d, draft("q2", "Why?")], vec![]),
            Err(CorpusError::Validation {
                field: "answer_index",
                ..
            })
        ));
        let mut d = draft("q1", "What is EOR?");
        d.options[3] = "A".into();
        assert!(matches!(
            ItemBank::new(lexicon(), vec![d, draft("q2", "Why?")], vec![]),
            Err(CorpusError::Validation {
                field: "options",
                ..
            })
        ));
    }

    #[test]
    fn json_round_trip_is_a_fixed_point() {
        let bank = ItemBank::new(
            lexicon(),
            vec![
                draft("q1", "What is EOR?"),
                draft("q2", "Why does EOR matter for mature fields?"),
            ],
            vec![LoggedResponse {
                user: "u1".into(),
                item: "q1".into(),
                correct: true,
            }],
        )
        .unwrap();
        let text = bank.to_json();
        let again = ItemBank::from_json(&text, "memory").unwrap();
        assert_eq!(again, bank);
        assert_eq!(again.to_json(), text);
    }

    #[test]
    fn parse_error_names_path() {
        let err =
            ItemBank::from_json(r#"{"concepts": [], "items": [{"id": 3}]}"#, "inline").unwrap_err();
        match err {
            CorpusError::Parse { path, .. } => assert!(path.starts_with("items[0]"), "{path}"),
            other => panic!("unexpected {other}"),
        }
    }
}
