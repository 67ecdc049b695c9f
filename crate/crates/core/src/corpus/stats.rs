use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CalibratedItem, CorpusError, Result};

/// Lowercases, turns every non-alphanumeric character into a separator and
/// splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Question-length moments and item-level frequency tables.
///
/// Every count is a number of items: a token occurring twice in one
/// question counts once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub mean_len: f64,
    /// Population standard deviation of question token counts.
    pub std_len: f64,
    pub vocab_counts: BTreeMap<String, usize>,
    pub concept_counts: BTreeMap<String, usize>,
    /// concept id -> token -> items tagged with the concept containing the token.
    pub concept_vocab_counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub total_items: usize,
}

pub fn compute_corpus_stats(items: &[CalibratedItem]) -> Result<CorpusStats> {
    if items.len() < 2 {
        return Err(CorpusError::Precondition(format!(
            "corpus statistics need at least 2 items, got {}",
            items.len()
        )));
    }
    let n = items.len() as f64;
    let token_lists: Vec<Vec<String>> = items.iter().map(|it| tokenize(&it.question)).collect();
    let mean_len = token_lists.iter().map(|t| t.len() as f64).sum::<f64>() / n;
    let var = token_lists
        .iter()
        .map(|t| {
            let d = t.len() as f64 - mean_len;
            d * d
        })
        .sum::<f64>()
        / n;
    let std_len = var.sqrt();
    if std_len == 0.0 {
        return Err(CorpusError::Degenerate(token_lists[0].len()));
    }

    let mut vocab_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut concept_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut concept_vocab_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (item, tokens) in items.iter().zip(&token_lists) {
        let distinct: BTreeSet<&String> = tokens.iter().collect();
        for tok in &distinct {
            *vocab_counts.entry((*tok).clone()).or_default() += 1;
        }
        let concepts: BTreeSet<&String> = item.concept_ids.iter().collect();
        for c in concepts {
            *concept_counts.entry(c.clone()).or_default() += 1;
            let table = concept_vocab_counts.entry(c.clone()).or_default();
            for tok in &distinct {
                *table.entry((*tok).clone()).or_default() += 1;
            }
        }
    }
    Ok(CorpusStats {
        mean_len,
        std_len,
        vocab_counts,
        concept_counts,
        concept_vocab_counts,
        total_items: items.len(),
    })
}

impl CorpusStats {
    /// The `n` most frequent tokens by item count, ties broken alphabetically.
    pub fn most_frequent(&self, n: usize) -> BTreeSet<String> {
        let mut ranked: Vec<(&String, &usize)> = self.vocab_counts.iter().collect();
        ranked.sort_by(|x, y| y.1.cmp(x.1).then_with(|| x.0.cmp(y.0)));
        ranked.into_iter().take(n).map(|(t, _)| t.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ceirt::ItemParameters;
    use crate::corpus::Scenario;
    use proptest::prelude::*;

    fn item(id: &str, q: &str, concepts: &[&str]) -> CalibratedItem {
        CalibratedItem {
            item_id: id.into(),
            question: q.into(),
            options: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            answer_index: 0,
            concept_ids: concepts.iter().map(|c| c.to_string()).collect(),
            params: ItemParameters::one_hot(1, 0, 0.0),
            scenario: Scenario::Unlabeled,
            source_sentence: String::new(),
            verified: false,
            experiment_related: None,
        }
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(tokenize("What is EOR?"), vec!["what", "is", "eor"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("CO2  flooding, CO2"),
            vec!["co2", "flooding", "co2"]
        );
    }

    #[test]
    fn mean_and_population_std() {
        let items = vec![
            item("1", "a b c d", &["x"]),
            item("2", "a b c d e f", &["x"]),
        ];
        let s = compute_corpus_stats(&items).unwrap();
        assert_eq!(s.mean_len, 5.0);
        assert_eq!(s.std_len, 1.0);
        assert_eq!(s.total_items, 2);
        assert_eq!(s.vocab_counts["a"], 2);
        assert_eq!(s.vocab_counts["e"], 1);
    }

    #[test]
    fn item_granularity_counts() {
        let items = vec![
            item("1", "co2 co2 co2", &["x", "y"]),
            item("2", "steam", &["y"]),
        ];
        let s = compute_corpus_stats(&items).unwrap();
        assert_eq!(s.vocab_counts["co2"], 1);
        assert_eq!(s.concept_counts["y"], 2);
        assert_eq!(s.concept_vocab_counts["x"]["co2"], 1);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(
            compute_corpus_stats(&[item("1", "a", &["x"])]),
            Err(CorpusError::Precondition(_))
        ));
        let same = vec![
            item(
                "1",
                "one two three four five six seven eight nine ten",
                &["x"],
            ),
            item(
                "2",
                "one two three four five six seven eight nine ten",
                &["x"],
            ),
            item("3", "a b c d e f g h i j", &["x"]),
        ];
        assert!(matches!(
            compute_corpus_stats(&same),
            Err(CorpusError::Degenerate(10))
        ));
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(text in "\\PC{0,60}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }
    }
}
