//! Inspiring-text selection and guiding-question quality control.

mod quality;
mod templates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ceirt::KnowledgeState;
use crate::corpus::ItemBank;

pub use quality::{
    filter_questions, score_question, GuidingQuestion, QualityScorer, QualityWeights,
    DEFAULT_STOPWORDS,
};
pub use templates::{
    assemble_guidance_prompt, format_inspiring_text, PromptTemplate, COT, QUESTION_HIGH,
    QUESTION_LOW, TUTOR, ZERO_SHOT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("non-finite input: {0}")]
    Domain(String),
    #[error("no inspiring-text candidates for {0}")]
    EmptyCandidates(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("invalid quality weights: {0}")]
    Weights(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("corpus statistics are degenerate: {0}")]
    Corpus(String),
}

pub type Result<T> = std::result::Result<T, GuidanceError>;

/// Which low concept the loop reacts to when several sit at or below `epsilon_low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LowStateRule {
    /// Smallest `theta_j`; ties go to the lower index.
    #[default]
    Minimum,
    /// First `theta_j <= epsilon_low` in concept order.
    FirstHit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionMode {
    UnderstandingBiased,
    ApplicationBiased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    pub epsilon_low: f64,
    pub top_k_texts: usize,
    pub quality_threshold: f64,
    pub weights: QualityWeights,
    pub low_state_rule: LowStateRule,
    /// How many of the most frequent bank tokens are ignored by the MI estimate.
    pub stopword_count: usize,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            epsilon_low: 1.0,
            top_k_texts: 3,
            quality_threshold: 0.3,
            weights: QualityWeights::default(),
            low_state_rule: LowStateRule::Minimum,
            stopword_count: DEFAULT_STOPWORDS,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k_texts == 0 {
            return Err(GuidanceError::Argument("top_k_texts must be >= 1".into()));
        }
        if !self.epsilon_low.is_finite() || !self.quality_threshold.is_finite() {
            return Err(GuidanceError::Domain(
                "epsilon_low and quality_threshold must be finite".into(),
            ));
        }
        QualityWeights::new(self.weights.alpha, self.weights.beta, self.weights.gamma)?;
        Ok(())
    }
}

/// A corpus fragment picked to seed question generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspiringText {
    pub item_id: String,
    pub fragment: String,
    pub concept_id: String,
    /// Item difficulty at `concept_id`.
    pub difficulty: f64,
    pub suitability: f64,
}

/// `exp(-(|theta_j - b| - 1)^2)`: 1 at a gap of exactly one, `e^-1` at no gap.
pub fn suitability_score(theta_j: f64, b: f64) -> Result<f64> {
    if !theta_j.is_finite() || !b.is_finite() {
        return Err(GuidanceError::Domain(format!("theta={theta_j}, b={b}")));
    }
    let d = (theta_j - b).abs() - 1.0;
    Ok((-d * d).exp())
}

pub fn detect_low_state(theta: &KnowledgeState, epsilon_low: f64) -> Option<(usize, f64)> {
    detect_low_state_with(theta, epsilon_low, LowStateRule::Minimum)
}

pub fn detect_low_state_with(
    theta: &KnowledgeState,
    epsilon_low: f64,
    rule: LowStateRule,
) -> Option<(usize, f64)> {
    let mut low = theta
        .values()
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, t)| *t <= epsilon_low);
    match rule {
        LowStateRule::FirstHit => low.next(),
        LowStateRule::Minimum => low.fold(None, |best: Option<(usize, f64)>, (j, t)| match best {
            Some((_, bt)) if bt <= t => best,
            _ => Some((j, t)),
        }),
    }
}

/// Top-`k` fragments for a single concept, or across all concepts.
pub fn select_inspiring_text(
    bank: &ItemBank,
    theta: &KnowledgeState,
    focus: Option<usize>,
    k: usize,
) -> Result<Vec<InspiringText>> {
    match focus {
        Some(j) => select_inspiring_text_in(bank, theta, &[j], k),
        None => select_inspiring_text_in(bank, theta, &[], k),
    }
}

/// Top-`k` fragments among items tagged with any concept in `scope`
/// (all concepts when `scope` is empty).
///
/// Each item's source sentence is scored at every in-scope concept it is
/// tagged with and keeps its best score. Results are ordered by suitability,
/// then by item id.
pub fn select_inspiring_text_in(
    bank: &ItemBank,
    theta: &KnowledgeState,
    scope: &[usize],
    k: usize,
) -> Result<Vec<InspiringText>> {
    if k == 0 {
        return Err(GuidanceError::Argument("k must be >= 1".into()));
    }
    if theta.len() != bank.k() {
        return Err(GuidanceError::Argument(format!(
            "theta has {} entries, bank has {} concepts",
            theta.len(),
            bank.k()
        )));
    }
    let mut candidates: Vec<InspiringText> = Vec::new();
    for item in &bank.items {
        let mut best: Option<(usize, f64)> = None;
        for j in bank.tagged_indices(item) {
            if !scope.is_empty() && !scope.contains(&j) {
                continue;
            }
            let s = suitability_score(theta.values()[j], item.params.b[j])?;
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((j, s));
            }
        }
        if let Some((j, s)) = best {
            candidates.push(InspiringText {
                item_id: item.item_id.clone(),
                fragment: item.source_sentence.clone(),
                concept_id: bank
                    .concept_set
                    .get(j)
                    .map(|c| c.id.clone())
                    .unwrap_or_default(),
                difficulty: item.params.b[j],
                suitability: s,
            });
        }
    }
    if candidates.is_empty() {
        let what = if scope.is_empty() {
            "the bank".to_string()
        } else {
            scope
                .iter()
                .filter_map(|&j| bank.concept_set.get(j).map(|c| format!("`{}`", c.id)))
                .collect::<Vec<_>>()
                .join(", ")
        };
        return Err(GuidanceError::EmptyCandidates(what));
    }
    candidates.sort_by(|x, y| {
        y.suitability
            .total_cmp(&x.suitability)
            .then_with(|| x.item_id.cmp(&y.item_id))
    });
    candidates.truncate(k);
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta(v: &[f64]) -> KnowledgeState {
        KnowledgeState::new(v.to_vec()).unwrap()
    }

    #[test]
    fn suitability_examples() {
        assert_eq!(suitability_score(2.0, 1.0).unwrap(), 1.0);
        assert!((suitability_score(0.7, 0.7).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((suitability_score(0.0, 3.0).unwrap() - 0.018_315_638_888_734_18).abs() < 1e-15);
        assert!(suitability_score(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn low_state_examples() {
        assert_eq!(
            detect_low_state(&theta(&[0.5, 2.0, 3.0]), 1.0),
            Some((0, 0.5))
        );
        assert_eq!(detect_low_state(&theta(&[2.0, 3.0]), 1.0), None);
        assert_eq!(detect_low_state(&theta(&[0.9, 0.4]), 1.0), Some((1, 0.4)));
        assert_eq!(
            detect_low_state_with(&theta(&[0.9, 0.4]), 1.0, LowStateRule::FirstHit),
            Some((0, 0.9))
        );
        assert_eq!(detect_low_state(&theta(&[1.0]), 1.0), Some((0, 1.0)));
    }

    #[test]
    fn config_validation() {
        assert!(GuidanceConfig::default().validate().is_ok());
        let cfg = GuidanceConfig {
            top_k_texts: 0,
            ..GuidanceConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
