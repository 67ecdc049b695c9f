use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::corpus::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimilarityScores {
    pub bleu4: f64,
    pub rouge1_f: f64,
    pub rouge2_f: f64,
    pub rouge_l_f: f64,
}

pub fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if n > 0 {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn f1(overlap: usize, cand: usize, reference: usize) -> f64 {
    if overlap == 0 || cand == 0 || reference == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand as f64;
    let r = overlap as f64 / reference as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-N F1 against one reference.
pub fn rouge_n(candidate: &[String], reference: &[String], n: usize) -> f64 {
    let c = ngram_counts(candidate, n);
    let r = ngram_counts(reference, n);
    let overlap = c
        .iter()
        .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    f1(
        overlap,
        candidate.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    )
}

pub fn lcs_len(x: &[String], y: &[String]) -> usize {
    let mut prev = vec![0usize; y.len() + 1];
    let mut cur = vec![0usize; y.len() + 1];
    for a in x {
        for (j, b) in y.iter().enumerate() {
            cur[j + 1] = if a == b {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[y.len()]
}

/// ROUGE-L F1 against one reference.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> f64 {
    f1(
        lcs_len(candidate, reference),
        candidate.len(),
        reference.len(),
    )
}

/// Corpus-free sentence BLEU with up to 4-gram clipped precision.
///
/// Candidates shorter than four tokens use orders `1..=len`. Any zero
/// precision gives 0. The brevity penalty uses the reference length closest
/// to the candidate's, the shorter one on ties.
pub fn bleu4(candidate: &[String], references: &[Vec<String>]) -> f64 {
    let c = candidate.len();
    if c == 0 || references.is_empty() {
        return 0.0;
    }
    let order = c.min(4);
    let mut log_sum = 0.0;
    for n in 1..=order {
        let counts = ngram_counts(candidate, n);
        let ref_counts: Vec<_> = references.iter().map(|r| ngram_counts(r, n)).collect();
        let clipped: usize = counts
            .iter()
            .map(|(g, &k)| {
                let max_ref = ref_counts
                    .iter()
                    .map(|m| m.get(g).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                k.min(max_ref)
            })
            .sum();
        if clipped == 0 {
            return 0.0;
        }
        log_sum += (clipped as f64 / (c - n + 1) as f64).ln();
    }
    let r = references
        .iter()
        .map(|x| x.len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("references nonempty");
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    (bp * (log_sum / order as f64).exp()).clamp(0.0, 1.0)
}

/// BLEU-4 and ROUGE-1/2/L F1 on corpus tokens. ROUGE scores take the best
/// reference per metric.
pub fn text_similarity(candidate: &str, references: &[String]) -> Result<SimilarityScores> {
    if references.is_empty() {
        return Err(EvalError::Argument(
            "at least one reference is required".into(),
        ));
    }
    let cand = tokenize(candidate);
    if cand.is_empty() {
        return Ok(SimilarityScores::default());
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    let best = |f: &dyn Fn(&[String]) -> f64| refs.iter().map(|r| f(r)).fold(0.0, f64::max);
    Ok(SimilarityScores {
        bleu4: bleu4(&cand, &refs),
        rouge1_f: best(&|r| rouge_n(&cand, r, 1)),
        rouge2_f: best(&|r| rouge_n(&cand, r, 2)),
        rouge_l_f: best(&|r| rouge_l(&cand, r)),
    })
}
