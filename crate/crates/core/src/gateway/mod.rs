//! Chat-completion access.
//!
//! Everything that talks to a model goes through [`LlmGateway`]. Two
//! implementations ship: [`LiveGateway`], an OpenAI-compatible HTTP client
//! with retries, and [`MockGateway`], which replays a [`MockScript`] and never
//! touches the network.

mod live;
mod mock;
mod parse;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use live::{HttpTransport, LiveGateway, Transport, TransportError};
pub use mock::{MockEntry, MockGateway, MockScript, RecordedCall};
pub use parse::{
    extract_concepts, fold_plural, parse_guiding_questions, ConceptExtraction, MAX_QUESTIONS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("gateway failed after {attempts} attempt(s): {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("gateway configuration error: {0}")]
    Config(String),
    #[error("gateway request rejected: {0}")]
    Rejected(String),
    #[error("mock script exhausted at call {call}")]
    ScriptExhausted { call: usize },
    #[error("could not parse model output: {reason}")]
    Parse { reason: String, raw: String },
}

pub type Result<T> = std::result::Result<T, GatewayError>;

/// Assistant text plus how many attempts it took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

pub trait LlmGateway: Send + Sync {
    fn complete(&self, system_prompt: &str, user_message: &str) -> Result<Completion>;

    /// Whether replies come from a real model. Offline gateways get
    /// deterministic fallbacks where the loop would otherwise ask the model
    /// for analysis.
    fn is_live(&self) -> bool {
        false
    }
}

impl<G: LlmGateway + ?Sized> LlmGateway for std::sync::Arc<G> {
    fn complete(&self, system_prompt: &str, user_message: &str) -> Result<Completion> {
        (**self).complete(system_prompt, user_message)
    }

    fn is_live(&self) -> bool {
        (**self).is_live()
    }
}

impl<G: LlmGateway + ?Sized> LlmGateway for Box<G> {
    fn complete(&self, system_prompt: &str, user_message: &str) -> Result<Completion> {
        (**self).complete(system_prompt, user_message)
    }

    fn is_live(&self) -> bool {
        (**self).is_live()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub temperature: f64,
    /// First backoff delay; doubles on every retry.
    pub backoff_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-4o-mini".into(),
            api_key_env: "AGQ_API_KEY".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            temperature: 0.0,
            backoff_ms: 500,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(GatewayError::Config("timeout must be > 0".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::Config("temperature must be >= 0".into()));
        }
        if self.endpoint_url.trim().is_empty() {
            return Err(GatewayError::Config("endpoint_url is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallRole {
    Tutor,
    ConceptExtraction,
    QuestionGeneration,
    Pipeline,
}

/// One line of the gateway transcript log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub round: u32,
    pub role: CallRole,
    pub prompt_hash: String,
    pub reply: String,
    pub attempts: u32,
}

/// SHA-256 over `system \0 user`, lowercase hex.
pub fn prompt_hash(system_prompt: &str, user_message: &str) -> String {
    let mut h = Sha256::new();
    h.update(system_prompt.as_bytes());
    h.update([0u8]);
    h.update(user_message.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Calls the gateway and appends a transcript record on success.
pub fn complete_logged(
    gateway: &dyn LlmGateway,
    system_prompt: &str,
    user_message: &str,
    round: u32,
    role: CallRole,
    log: &mut Vec<TranscriptRecord>,
) -> Result<Completion> {
    let completion = gateway.complete(system_prompt, user_message)?;
    log.push(TranscriptRecord {
        round,
        role,
        prompt_hash: prompt_hash(system_prompt, user_message),
        reply: completion.text.clone(),
        attempts: completion.attempts,
    });
    Ok(completion)
}

/// Writes one JSON object per record.
pub fn write_transcript_jsonl(records: &[TranscriptRecord], path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_hash_is_stable_and_separates_fields() {
        let h = prompt_hash("ab", "c");
        assert_eq!(h.len(), 64);
        assert_eq!(h, prompt_hash("ab", "c"));
        assert_ne!(h, prompt_hash("a", "bc"));
    }

    #[test]
    fn config_rejects_zero_timeout() {
        let cfg = GatewayConfig {
            timeout_secs: 0.0,
            ..GatewayConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(GatewayError::Config(_))));
        assert!(GatewayConfig::default().validate().is_ok());
    }

    #[test]
    fn logged_calls_land_in_transcript() {
        let gw = MockGateway::new(MockScript::new().reply("Steam injection reduces viscosity"));
        let mut log = Vec::new();
        let c = complete_logged(&gw, "sys", "user", 2, CallRole::Tutor, &mut log).unwrap();
        assert_eq!(c.text, "Steam injection reduces viscosity");
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].round, 2);
        assert_eq!(log[0].prompt_hash, prompt_hash("sys", "user"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_transcript_jsonl(&log, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back: TranscriptRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, log[0]);
    }
}
