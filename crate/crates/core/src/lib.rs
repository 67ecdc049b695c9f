//! Adaptive guiding-question engine.
//!
//! The crate tracks a learner's knowledge over a fixed set of concepts with a
//! concept-level two-parameter logistic model, picks corpus fragments whose
//! difficulty sits about one unit above the learner's state, and asks an LLM
//! for guiding questions which are then scored and filtered.
//!
//! Module map:
//!
//! - [`ceirt`]: response model, BCE loss and gradients, Adam updates,
//!   item-bank calibration and simulated evidence.
//! - [`corpus`]: item-bank schema, validation, corpus statistics,
//!   tokenization and the LLM-assisted dataset pipeline.
//! - [`guidance`]: suitability scoring, inspiring-text selection, prompt
//!   templates and question quality control.
//! - [`gateway`]: chat-completion client with retries, a scripted mock,
//!   concept extraction and question parsing.
//! - [`session`]: the turn loop, session persistence and the HTTP API.
//! - [`eval`]: simulated-learner experiments, text similarity metrics and
//!   knowledge reports.
//! - [`cli`]: command dispatch for the `agq` binary.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod ceirt;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod gateway;
pub mod guidance;
pub mod rng;
pub mod session;

pub use ceirt::{ConceptSet, ItemParameters, KnowledgeState, OptimizerConfig, ResponseRecord};
pub use corpus::{CalibratedItem, ItemBank};
pub use gateway::{LlmGateway, MockGateway, MockScript};
pub use guidance::{GuidanceConfig, GuidingQuestion, QualityWeights};
pub use session::{Session, TurnResult};
