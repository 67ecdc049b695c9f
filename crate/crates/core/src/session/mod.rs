//! The dialogue loop: one [`run_turn`] call per user query, with session
//! state persisted as versioned JSON and served over HTTP by [`server`].

mod clock;
pub mod server;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clock::{Clock, StepClock, SystemClock};
pub use server::{router, serve_api, AppState};

use crate::ceirt::{
    simulate_evidence, update_knowledge_state, CeirtError, ConceptSet, KnowledgeState,
    OptimizerConfig, ResponseRecord,
};
use crate::corpus::{tokenize, ItemBank};
use crate::gateway::{
    complete_logged, extract_concepts, parse_guiding_questions, CallRole, GatewayConfig,
    GatewayError, LlmGateway, MockScript, TranscriptRecord,
};
use crate::guidance::{
    assemble_guidance_prompt, detect_low_state_with, filter_questions, select_inspiring_text_in,
    GuidanceConfig, GuidanceError, GuidingQuestion, InspiringText, QualityScorer, QuestionMode,
    TUTOR,
};
use crate::rng;

pub const SCHEMA_VERSION: u32 = 1;

/// Substring of the tutor prompt, for routing scripted mock replies.
pub const TUTOR_MARKER: &str = "Your task is to teach users";
/// Substring of both question-generation prompts.
pub const QUESTION_MARKER: &str = "propose 5 guiding questions";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] CeirtError),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("session {0} is terminated")]
    Terminated(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid session file at `{field}`: {message}")]
    Restore {
        path: String,
        field: String,
        message: String,
    },
    #[error("{path}: unsupported schema_version {found}")]
    Schema { path: String, found: u32 },
}

pub type Result<T> = std::result::Result<T, SessionError>;

/// Everything a session needs besides the bank and the gateway.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub guidance: GuidanceConfig,
    pub optimizer: OptimizerConfig,
    pub gateway: GatewayConfig,
    pub seed: u64,
    /// Append graded quiz answers to the history used for `theta` updates.
    pub answer_evidence: bool,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.guidance.validate()?;
        self.optimizer.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub round: u32,
    pub response: String,
    pub touched_concepts: Vec<String>,
    pub theta_after: KnowledgeState,
    pub guiding_questions: Vec<GuidingQuestion>,
    pub branch: Branch,
    /// Concept that triggered the low branch.
    pub low_concept: Option<String>,
    pub inspiring_texts: Vec<InspiringText>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub round: u32,
    pub at_ms: u64,
    pub query: String,
    pub theta_before: KnowledgeState,
    pub result: TurnResult,
    /// Scored questions that fell below the quality threshold.
    pub rejected_questions: Vec<GuidingQuestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub at_ms: u64,
    pub item_id: String,
    pub selected_index: usize,
    pub correct: bool,
    /// Whether the answer entered the `theta` history.
    pub used_as_evidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub schema_version: u32,
    pub session_id: String,
    pub concept_set: ConceptSet,
    pub initial_theta: KnowledgeState,
    pub theta: KnowledgeState,
    pub history: Vec<ResponseRecord>,
    pub transcript: Vec<TurnRecord>,
    pub answers: Vec<AnswerRecord>,
    pub gateway_log: Vec<TranscriptRecord>,
    pub config: SessionConfig,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TurnOutcome {
    Turn(Box<TurnResult>),
    /// The query asked to exit; the session is now terminated.
    Terminated,
}

impl TurnOutcome {
    pub fn into_turn(self) -> Option<TurnResult> {
        match self {
            TurnOutcome::Turn(t) => Some(*t),
            TurnOutcome::Terminated => None,
        }
    }
}

/// What [`run_turn`] reads but does not own.
#[derive(Clone, Copy)]
pub struct TurnContext<'a> {
    pub bank: &'a ItemBank,
    pub gateway: &'a dyn LlmGateway,
    pub clock: &'a dyn Clock,
}

/// 128-bit hex id drawn from the seed's `session-id` stream.
pub fn session_id_from_seed(seed: u64) -> String {
    format!("{:032x}", rng::stream(seed, "session-id").random::<u128>())
}

/// 128-bit hex id from the thread RNG.
pub fn random_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

/// New session over `bank`. Without `initial_theta` the state is drawn from
/// the seed's `theta` stream.
pub fn create_session(
    bank: &ItemBank,
    initial_theta: Option<KnowledgeState>,
    config: SessionConfig,
    clock: &dyn Clock,
) -> Result<Session> {
    config.validate()?;
    let k = bank.k();
    let theta = match initial_theta {
        Some(t) => {
            t.check_len(k)?;
            t
        }
        None => KnowledgeState::initial(k, &mut rng::stream(config.seed, "theta")),
    };
    let now = clock.now_ms();
    Ok(Session {
        schema_version: SCHEMA_VERSION,
        session_id: session_id_from_seed(config.seed),
        concept_set: bank.concept_set.clone(),
        initial_theta: theta.clone(),
        theta,
        history: Vec::new(),
        transcript: Vec::new(),
        answers: Vec::new(),
        gateway_log: Vec::new(),
        config,
        created_at_ms: now,
        updated_at_ms: now,
        terminated: false,
    })
}

/// Appends the two mock replies one turn consumes: the tutor answer, then the
/// guiding-question list.
pub fn script_turn(script: MockScript, response: &str, questions: &str) -> MockScript {
    script
        .when_contains(TUTOR_MARKER, response)
        .when_contains(QUESTION_MARKER, questions)
}

/// Proficiency label for one concept.
pub fn proficiency_label(theta_j: f64, epsilon: f64) -> &'static str {
    if theta_j < epsilon {
        "novice"
    } else if theta_j < 2.0 * epsilon {
        "developing"
    } else {
        "proficient"
    }
}

/// Text that fills the tutor prompt's knowledge-state slot.
pub fn render_knowledge_state(
    concepts: &ConceptSet,
    theta: &KnowledgeState,
    epsilon: f64,
) -> String {
    concepts
        .iter()
        .zip(theta.values())
        .map(|(c, &t)| format!("{}: {}", c.name, proficiency_label(t, epsilon)))
        .collect::<Vec<_>>()
        .join("; ")
}

/// True when the query contains the word `exit`.
pub fn is_exit(query: &str) -> bool {
    tokenize(query).iter().any(|t| t == "exit")
}

/// Runs one loop iteration for `query`.
///
/// Work happens on a copy of the session; `session` is replaced only when
/// the whole turn succeeds.
pub fn run_turn(session: &mut Session, ctx: TurnContext<'_>, query: &str) -> Result<TurnOutcome> {
    if session.terminated {
        return Err(SessionError::Terminated(session.session_id.clone()));
    }
    if query.trim().is_empty() {
        return Err(SessionError::Argument("query is empty".into()));
    }
    if ctx.bank.concept_set != session.concept_set {
        return Err(SessionError::Argument(
            "bank concept set differs from the session's".into(),
        ));
    }
    if is_exit(query) {
        session.terminated = true;
        session.updated_at_ms = ctx.clock.now_ms();
        return Ok(TurnOutcome::Terminated);
    }

    let mut next = session.clone();
    let round = next.transcript.len() as u32;
    let cfg = next.config.clone();
    let concepts = &next.concept_set;
    let theta_before = next.theta.clone();
    let mut warnings = Vec::new();

    let tutor_prompt = TUTOR.render(&[(
        "Knowledge State",
        &render_knowledge_state(concepts, &next.theta, cfg.guidance.epsilon_low),
    )])?;
    let response = complete_logged(
        ctx.gateway,
        &tutor_prompt,
        query,
        round,
        CallRole::Tutor,
        &mut next.gateway_log,
    )?
    .text;

    let extraction = extract_concepts(&response, concepts, ctx.gateway)?;
    if let Some((sys, user, completion)) = &extraction.exchange {
        next.gateway_log.push(TranscriptRecord {
            round,
            role: CallRole::ConceptExtraction,
            prompt_hash: crate::gateway::prompt_hash(sys, user),
            reply: completion.text.clone(),
            attempts: completion.attempts,
        });
    }
    warnings.extend(extraction.warnings);
    let touched = extraction.concept_ids;

    if !touched.is_empty() {
        let evidence = simulate_evidence(&touched, concepts, &next.theta, round)?;
        next.history.extend(evidence);
        next.theta = update_knowledge_state(&next.theta, &next.history, &cfg.optimizer)?;
    }

    let low = detect_low_state_with(
        &next.theta,
        cfg.guidance.epsilon_low,
        cfg.guidance.low_state_rule,
    );
    let (branch, mode, scope) = match low {
        Some((j, _)) => (Branch::Low, QuestionMode::UnderstandingBiased, vec![j]),
        None => (Branch::High, QuestionMode::ApplicationBiased, Vec::new()),
    };
    let low_concept = low.and_then(|(j, _)| concepts.get(j)).map(|c| c.id.clone());

    let texts =
        match select_inspiring_text_in(ctx.bank, &next.theta, &scope, cfg.guidance.top_k_texts) {
            Ok(t) => t,
            Err(GuidanceError::EmptyCandidates(what)) => {
                warnings.push(format!(
                    "no inspiring text for {what}; no guiding questions this turn"
                ));
                Vec::new()
            }
            Err(e) => return Err(e.into()),
        };

    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    if !texts.is_empty() {
        let prompt_ids = prompt_concepts(low_concept.as_deref(), &touched, &texts);
        let names: Vec<String> = prompt_ids
            .iter()
            .filter_map(|id| concepts.index_of(id).and_then(|j| concepts.get(j)))
            .map(|c| c.name.clone())
            .collect();
        let prompt = assemble_guidance_prompt(mode, &names, &texts)?;
        let reply = complete_logged(
            ctx.gateway,
            &prompt,
            query,
            round,
            CallRole::QuestionGeneration,
            &mut next.gateway_log,
        )?
        .text;
        match parse_guiding_questions(&reply) {
            Ok(questions) => {
                let scorer =
                    QualityScorer::new(ctx.bank, cfg.guidance.weights, cfg.guidance.stopword_count);
                let mut scored = Vec::with_capacity(questions.len());
                for q in &questions {
                    let target = target_concept(&scorer, q, &prompt_ids);
                    scored.push(scorer.score(q, target, &next.theta, mode)?);
                }
                (accepted, rejected) = filter_questions(scored, cfg.guidance.quality_threshold);
            }
            Err(e) => warnings.push(format!("could not parse guiding questions: {e}")),
        }
    }

    for w in &warnings {
        tracing::warn!(session = %next.session_id, round, "{w}");
    }
    let result = TurnResult {
        round,
        response,
        touched_concepts: touched,
        theta_after: next.theta.clone(),
        guiding_questions: accepted,
        branch,
        low_concept,
        inspiring_texts: texts,
        warnings,
    };
    let now = ctx.clock.now_ms();
    next.transcript.push(TurnRecord {
        round,
        at_ms: now,
        query: query.to_string(),
        theta_before,
        result: result.clone(),
        rejected_questions: rejected,
    });
    next.updated_at_ms = now;
    *session = next;
    Ok(TurnOutcome::Turn(Box::new(result)))
}

/// Concept ids named in the question prompt: the low concept first, then
/// touched concepts, then the concepts of the selected texts.
fn prompt_concepts(low: Option<&str>, touched: &[String], texts: &[InspiringText]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    let candidates = low
        .into_iter()
        .map(str::to_string)
        .chain(touched.iter().cloned());
    for id in candidates {
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    if ids.is_empty() {
        for t in texts {
            if !ids.contains(&t.concept_id) {
                ids.push(t.concept_id.clone());
            }
        }
    }
    ids
}

/// Prompt concept with the highest MI for `question`; ties keep the earlier one.
fn target_concept<'c>(scorer: &QualityScorer<'_>, question: &str, ids: &'c [String]) -> &'c str {
    let mut best = &ids[0];
    let mut best_mi = scorer.mutual_information(question, best);
    for id in &ids[1..] {
        let mi = scorer.mutual_information(question, id);
        if mi > best_mi {
            best = id;
            best_mi = mi;
        }
    }
    best
}

/// Grades a quiz answer on a bank item and, when enabled, feeds it into the
/// `theta` history as a genuine response.
pub fn record_answer(
    session: &mut Session,
    bank: &ItemBank,
    clock: &dyn Clock,
    item_id: &str,
    selected_index: usize,
) -> Result<AnswerRecord> {
    if session.terminated {
        return Err(SessionError::Terminated(session.session_id.clone()));
    }
    let item = bank
        .item(item_id)
        .ok_or_else(|| SessionError::Argument(format!("unknown item `{item_id}`")))?;
    if selected_index >= item.options.len() {
        return Err(SessionError::Argument(format!(
            "selected_index {selected_index} out of range for {} options",
            item.options.len()
        )));
    }
    let correct = selected_index == item.answer_index;
    let use_it = session.config.answer_evidence;
    let mut next = session.clone();
    if use_it {
        next.history.push(ResponseRecord {
            item_id: item.item_id.clone(),
            params: item.params.clone(),
            correct,
            round: next.transcript.len() as u32,
            simulated: false,
        });
        next.theta = update_knowledge_state(&next.theta, &next.history, &next.config.optimizer)?;
    }
    let now = clock.now_ms();
    let record = AnswerRecord {
        at_ms: now,
        item_id: item.item_id.clone(),
        selected_index,
        correct,
        used_as_evidence: use_it,
    };
    next.answers.push(record.clone());
    next.updated_at_ms = now;
    *session = next;
    Ok(record)
}

impl Session {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("session serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let session: Session =
            serde_path_to_error::deserialize(de).map_err(|e| SessionError::Restore {
                path: origin.to_string(),
                field: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        if session.schema_version != SCHEMA_VERSION {
            return Err(SessionError::Schema {
                path: origin.to_string(),
                found: session.schema_version,
            });
        }
        session.theta.check_len(session.concept_set.len())?;
        if session
            .transcript
            .iter()
            .enumerate()
            .any(|(i, t)| t.round != i as u32)
        {
            return Err(SessionError::Restore {
                path: origin.to_string(),
                field: "transcript".into(),
                message: "round numbers must run 0..n without gaps".into(),
            });
        }
        Ok(session)
    }
}

pub fn persist_session(session: &Session, path: &Path) -> Result<()> {
    std::fs::write(path, session.to_json()).map_err(|source| SessionError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn restore_session(path: &Path) -> Result<Session> {
    let text = std::fs::read_to_string(path).map_err(|source| SessionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Session::from_json(&text, &path.display().to_string())
}
