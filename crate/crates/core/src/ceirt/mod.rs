//! Concept-level item response model.
//!
//! A learner's knowledge state is a vector `theta` over `K` concepts. An item
//! carries per-concept discrimination `a` and difficulty `b`, and the
//! probability of a correct answer is
//!
//! ```text
//! p = sigmoid( sum_j (a_j * theta_j - b_j) )
//! ```
//!
//! Items are typically sparse: `a` and `b` are nonzero only on the concepts
//! the item is tagged with.

mod adam;
mod calibrate;
mod loss;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::Adam;
pub use calibrate::{
    calibrate_item_bank, CalibrationReport, CalibrationResult, ItemSpec, Observation,
    ResponseMatrix,
};
pub use loss::{loss_and_gradients, update_knowledge_state, LossGradients};

/// Lower/upper clamp applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Standard deviation of the random initializer for `theta` and `b`.
pub const INIT_STD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CeirtError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite or out-of-domain value: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite value during optimization (round {round}, epoch {epoch})")]
    Numeric { round: u32, epoch: usize },
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("invalid optimizer config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, CeirtError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub name: String,
}

/// Ordered concept list. Index `j` of a concept is stable for the lifetime
/// of the set and addresses component `j` of every vector in this module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Concept>", into = "Vec<Concept>")]
pub struct ConceptSet {
    concepts: Vec<Concept>,
}

impl ConceptSet {
    pub fn new(concepts: Vec<Concept>) -> Result<Self> {
        if concepts.is_empty() {
            return Err(CeirtError::Argument("concept set must not be empty".into()));
        }
        for (i, c) in concepts.iter().enumerate() {
            if c.id.trim().is_empty() {
                return Err(CeirtError::Argument(format!("concept {i} has an empty id")));
            }
            if concepts[..i].iter().any(|o| o.id == c.id) {
                return Err(CeirtError::Argument(format!(
                    "duplicate concept id `{}`",
                    c.id
                )));
            }
        }
        Ok(Self { concepts })
    }

    /// Number of concepts, `K`.
    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Concept> {
        self.concepts.get(index)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c.id == id)
    }

    pub fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| CeirtError::UnknownConcept(id.to_string()))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Concept> {
        self.concepts.iter()
    }

    pub fn ids(&self) -> Vec<String> {
        self.concepts.iter().map(|c| c.id.clone()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.concepts.iter().map(|c| c.name.clone()).collect()
    }
}

impl TryFrom<Vec<Concept>> for ConceptSet {
    type Error = CeirtError;

    fn try_from(value: Vec<Concept>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ConceptSet> for Vec<Concept> {
    fn from(value: ConceptSet) -> Self {
        value.concepts
    }
}

/// Per-concept ability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnowledgeState(Vec<f64>);

impl KnowledgeState {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if let Some(v) = theta.iter().find(|v| !v.is_finite()) {
            return Err(CeirtError::Domain(format!("theta entry {v}")));
        }
        Ok(Self(theta))
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    /// Draws every component from `Normal(0, INIT_STD)`.
    pub fn initial<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        Self((0..k).map(|_| normal.sample(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, j: usize) -> Option<f64> {
        self.0.get(j).copied()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn check_len(&self, k: usize) -> Result<()> {
        if self.0.len() != k {
            return Err(CeirtError::Dimension {
                expected: k,
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

/// Discrimination and difficulty vectors of one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParameters {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ItemParameters {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let params = Self { a, b };
        params.validate()?;
        Ok(params)
    }

    /// Item with `a = 1` and `b = difficulty` at `concept`, zero elsewhere.
    pub fn one_hot(k: usize, concept: usize, difficulty: f64) -> Self {
        let mut a = vec![0.0; k];
        let mut b = vec![0.0; k];
        a[concept] = 1.0;
        b[concept] = difficulty;
        Self { a, b }
    }

    /// Pre-calibration parameters: `a = 1` on `tagged`, `b ~ Normal(offset, INIT_STD)`
    /// on `tagged`, zero elsewhere.
    pub fn initial<R: Rng + ?Sized>(k: usize, tagged: &[usize], offset: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut a = vec![0.0; k];
        let mut b = vec![0.0; k];
        for &j in tagged {
            a[j] = 1.0;
            b[j] = offset + normal.sample(rng);
        }
        Self { a, b }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(CeirtError::Dimension {
                expected: self.a.len(),
                found: self.b.len(),
            });
        }
        if let Some(v) = self.a.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(CeirtError::Domain(format!("discrimination entry {v}")));
        }
        if let Some(v) = self.b.iter().find(|v| !v.is_finite()) {
            return Err(CeirtError::Domain(format!("difficulty entry {v}")));
        }
        Ok(())
    }

    /// At least one positive discrimination entry.
    pub fn is_assessable(&self) -> bool {
        self.a.iter().any(|&v| v > 0.0)
    }

    fn check_dim(&self, k: usize) -> Result<()> {
        for len in [self.a.len(), self.b.len()] {
            if len != k {
                return Err(CeirtError::Dimension {
                    expected: k,
                    found: len,
                });
            }
        }
        Ok(())
    }
}

/// One observed (or simulated) answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub item_id: String,
    pub params: ItemParameters,
    pub correct: bool,
    pub round: u32,
    /// Set on records produced by [`simulate_evidence`].
    #[serde(default)]
    pub simulated: bool,
}

impl ResponseRecord {
    pub fn outcome(&self) -> f64 {
        if self.correct {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl OptimizerConfig {
    /// Settings for per-turn knowledge-state updates.
    pub fn knowledge_update() -> Self {
        Self {
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 5,
            seed: 0,
        }
    }

    /// Settings for joint item-bank calibration.
    pub fn calibration() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 200,
            ..Self::knowledge_update()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CeirtError::Config("learning_rate must be > 0".into()));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(CeirtError::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(CeirtError::Config("epsilon must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(CeirtError::Config("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::knowledge_update()
    }
}

/// Logistic sigmoid, stable for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `sum_j (a_j * theta_j - b_j)`, accumulated in index order.
pub fn logit(theta: &[f64], params: &ItemParameters) -> f64 {
    let mut z = 0.0;
    for ((&a, &b), &t) in params.a.iter().zip(&params.b).zip(theta) {
        z += a * t - b;
    }
    z
}

/// Probability of a correct response, clamped into `[1e-12, 1 - 1e-12]`.
pub fn predict_correct(theta: &KnowledgeState, params: &ItemParameters) -> Result<f64> {
    params.check_dim(theta.len())?;
    if theta.values().iter().any(|v| !v.is_finite()) {
        return Err(CeirtError::Domain(
            "theta contains a non-finite entry".into(),
        ));
    }
    if params.a.iter().chain(&params.b).any(|v| !v.is_finite()) {
        return Err(CeirtError::Domain(
            "item parameters contain a non-finite entry".into(),
        ));
    }
    Ok(clamp_prob(sigmoid(logit(theta.values(), params))))
}

/// One correct answer on a virtual item per touched concept.
///
/// The virtual item is one-hot at the concept with `b` equal to the current
/// `theta` there, so each record starts at `p = 0.5`.
pub fn simulate_evidence(
    concepts: &[String],
    concept_set: &ConceptSet,
    theta: &KnowledgeState,
    round: u32,
) -> Result<Vec<ResponseRecord>> {
    if concepts.is_empty() {
        return Err(CeirtError::Argument(
            "evidence requires at least one concept".into(),
        ));
    }
    theta.check_len(concept_set.len())?;
    concepts
        .iter()
        .map(|id| {
            let j = concept_set.require(id)?;
            Ok(ResponseRecord {
                item_id: format!("virtual:{id}:{round}"),
                params: ItemParameters::one_hot(concept_set.len(), j, theta.values()[j]),
                correct: true,
                round,
                simulated: true,
            })
        })
        .collect()
}
