use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{GuidanceError, QuestionMode, Result};
use crate::ceirt::{sigmoid, KnowledgeState};
use crate::corpus::{tokenize, CorpusStats, ItemBank};

/// Default number of most-frequent bank tokens treated as non-content.
pub const DEFAULT_STOPWORDS: usize = 50;

/// Weights of the quality score; nonnegative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct QualityWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Deserialize)]
struct RawWeights {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl TryFrom<RawWeights> for QualityWeights {
    type Error = GuidanceError;

    fn try_from(r: RawWeights) -> Result<Self> {
        Self::new(r.alpha, r.beta, r.gamma)
    }
}

impl QualityWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, w) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(GuidanceError::Weights(format!(
                    "{name} = {w} must be finite and >= 0"
                )));
            }
        }
        let sum = alpha + beta + gamma;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GuidanceError::Weights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn combine(&self, align: f64, mi: f64, complexity: f64) -> f64 {
        self.alpha * align + self.beta * mi + self.gamma * complexity
    }
}

impl Default for QualityWeights {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.3,
            gamma: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidingQuestion {
    pub text: String,
    pub target_concept: String,
    pub align: f64,
    pub mi: f64,
    pub complexity: f64,
    pub quality: f64,
    pub mode: QuestionMode,
}

/// Scores questions against one bank. Holds the stopword list so it is
/// computed once.
#[derive(Debug, Clone)]
pub struct QualityScorer<'a> {
    bank: &'a ItemBank,
    weights: QualityWeights,
    stopwords: BTreeSet<String>,
}

impl<'a> QualityScorer<'a> {
    pub fn new(bank: &'a ItemBank, weights: QualityWeights, stopword_count: usize) -> Self {
        Self {
            bank,
            weights,
            stopwords: bank.stats.most_frequent(stopword_count),
        }
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    /// Normalized item-level PMI between a question's content tokens and a
    /// concept, in `[0, 1]`.
    ///
    /// For each distinct content token `w`:
    /// `max(0, ln(f(w,c) * N / (f(w) * f(c))))`, zero when `f(w,c) = 0`.
    /// The mean over tokens is divided by `ln N`.
    pub fn mutual_information(&self, question: &str, concept_id: &str) -> f64 {
        let stats: &CorpusStats = &self.bank.stats;
        let n = stats.total_items as f64;
        if stats.total_items < 2 {
            return 0.0;
        }
        let tokens: BTreeSet<String> = tokenize(question)
            .into_iter()
            .filter(|t| !self.stopwords.contains(t))
            .collect();
        if tokens.is_empty() {
            return 0.0;
        }
        let f_c = stats.concept_counts.get(concept_id).copied().unwrap_or(0) as f64;
        let joint = stats.concept_vocab_counts.get(concept_id);
        let total: f64 = tokens
            .iter()
            .map(|w| {
                let f_wc = joint.and_then(|m| m.get(w)).copied().unwrap_or(0) as f64;
                if f_wc == 0.0 {
                    return 0.0;
                }
                let f_w = stats.vocab_counts[w] as f64;
                (f_wc * n / (f_w * f_c)).ln().max(0.0)
            })
            .sum();
        (total / tokens.len() as f64 / n.ln()).clamp(0.0, 1.0)
    }

    /// `sigmoid((len(q) - mean) / std)` over question token counts.
    pub fn complexity(&self, question: &str) -> Result<f64> {
        let stats = &self.bank.stats;
        if !(stats.std_len > 0.0) {
            return Err(GuidanceError::Corpus(format!(
                "std_len = {}",
                stats.std_len
            )));
        }
        let len = tokenize(question).len() as f64;
        Ok(sigmoid((len - stats.mean_len) / stats.std_len))
    }

    pub fn score(
        &self,
        question: &str,
        target: &str,
        theta: &KnowledgeState,
        mode: QuestionMode,
    ) -> Result<GuidingQuestion> {
        let j = self
            .bank
            .concept_set
            .index_of(target)
            .ok_or_else(|| GuidanceError::Argument(format!("unknown concept `{target}`")))?;
        let theta_j = theta
            .get(j)
            .ok_or_else(|| GuidanceError::Argument("theta shorter than concept set".into()))?;
        let align = 1.0 - theta_j;
        let mi = self.mutual_information(question, target);
        let complexity = self.complexity(question)?;
        Ok(GuidingQuestion {
            text: question.to_string(),
            target_concept: target.to_string(),
            align,
            mi,
            complexity,
            quality: self.weights.combine(align, mi, complexity),
            mode,
        })
    }
}

/// Scores one question with the default stopword list.
pub fn score_question(
    question: &str,
    target: &str,
    theta: &KnowledgeState,
    bank: &ItemBank,
    weights: QualityWeights,
    mode: QuestionMode,
) -> Result<GuidingQuestion> {
    QualityScorer::new(bank, weights, DEFAULT_STOPWORDS).score(question, target, theta, mode)
}

/// Splits into `quality >= threshold` and the rest, keeping order.
pub fn filter_questions(
    candidates: Vec<GuidingQuestion>,
    threshold: f64,
) -> (Vec<GuidingQuestion>, Vec<GuidingQuestion>) {
    candidates.into_iter().partition(|q| q.quality >= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(quality: f64) -> GuidingQuestion {
        GuidingQuestion {
            text: format!("q{quality}"),
            target_concept: "c".into(),
            align: 0.0,
            mi: 0.0,
            complexity: 0.0,
            quality,
            mode: QuestionMode::ApplicationBiased,
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(QualityWeights::new(0.5, 0.3, 0.2).is_ok());
        assert!(QualityWeights::new(0.5, 0.3, 0.3).is_err());
        assert!(QualityWeights::new(1.2, -0.2, 0.0).is_err());
        let parsed: std::result::Result<QualityWeights, _> =
            serde_json::from_str(r#"{"alpha": 0.6, "beta": 0.6, "gamma": 0.0}"#);
        assert!(parsed.is_err());
    }

    #[test]
    fn weighted_sum() {
        let w = QualityWeights::new(0.5, 0.3, 0.2).unwrap();
        assert!((w.combine(0.5, 0.2, 0.6) - 0.43).abs() < 1e-15);
    }

    #[test]
    fn filter_partitions_in_order() {
        let (acc, rej) = filter_questions(vec![q(0.43), q(0.10), q(0.3), q(0.29)], 0.3);
        assert_eq!(
            acc.iter().map(|g| g.quality).collect::<Vec<_>>(),
            vec![0.43, 0.3]
        );
        assert_eq!(
            rej.iter().map(|g| g.quality).collect::<Vec<_>>(),
            vec![0.10, 0.29]
        );
        let (a, r) = filter_questions(vec![], 0.3);
        assert!(a.is_empty() && r.is_empty());
    }
}
