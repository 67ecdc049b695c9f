//! Offline experiments with a simulated learner, BLEU/ROUGE text metrics
//! and knowledge-state reports.

mod ablation;
mod metrics;
mod policy;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ablation::{
    expected_gain, run_ablation, write_ablation_csv, AblationConfig, AblationPoint, AblationResult,
};
pub use metrics::{
    bleu4, lcs_len, ngram_counts, rouge_l, rouge_n, text_similarity, SimilarityScores,
};
pub use policy::{
    default_study_bank, holdout_split, run_policy_comparison, synthetic_bank, write_policy_csv,
    Policy, PolicyComparison, PolicyConfig, PolicyRun,
};
pub use report::{export_knowledge_report, KnowledgeTrace, ReportFiles};

use crate::ceirt::{sigmoid, CeirtError};
use crate::corpus::CorpusError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Model(#[from] CeirtError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, EvalError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Stand-in learner with a latent ability per concept.
///
/// Answers item `b` on concept `j` correctly with probability
/// `sigmoid(a_sim * (theta*_j - b))`. A correct answer on an item harder than
/// the learner moves `theta*_j` up to `b`; nothing else changes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedLearner {
    pub true_theta: Vec<f64>,
    pub discrimination: f64,
}

impl SimulatedLearner {
    pub fn new(true_theta: Vec<f64>, discrimination: f64) -> Result<Self> {
        if true_theta.is_empty() || true_theta.iter().any(|t| !t.is_finite()) {
            return Err(EvalError::Argument(
                "true_theta must be nonempty and finite".into(),
            ));
        }
        if !(discrimination > 0.0 && discrimination.is_finite()) {
            return Err(EvalError::Argument(format!(
                "discrimination must be > 0, got {discrimination}"
            )));
        }
        Ok(Self {
            true_theta,
            discrimination,
        })
    }

    pub fn p_correct(&self, j: usize, b: f64) -> f64 {
        sigmoid(self.discrimination * (self.true_theta[j] - b))
    }

    /// Answers with uniform draw `u`; returns the gain applied to `theta*_j`.
    pub fn study(&mut self, j: usize, b: f64, u: f64) -> f64 {
        let correct = u < self.p_correct(j, b);
        let gain = if correct && b > self.true_theta[j] {
            b - self.true_theta[j]
        } else {
            0.0
        };
        self.true_theta[j] += gain;
        gain
    }

    pub fn mean_theta(&self) -> f64 {
        self.true_theta.iter().sum::<f64>() / self.true_theta.len() as f64
    }
}

/// Maps `f` over seeds on scoped threads; output keeps seed order.
pub(crate) fn par_map_seeds<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(|&s| f(s)).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("seed worker panicked"))
            .collect()
    })
}
