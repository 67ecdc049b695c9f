use std::time::Duration;

use serde_json::{json, Value};

use super::{Completion, GatewayConfig, GatewayError, LlmGateway, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Worth retrying: timeouts, connection failures, 429 and 5xx.
    Transient(String),
    /// 401/403.
    Unauthorized(String),
    /// Anything else.
    Fatal(String),
}

/// Moves one JSON request to the endpoint and back.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> std::result::Result<Value, TransportError>;
}

/// Blocking `reqwest` transport. Must not be driven from inside an async
/// task; wrap calls in `spawn_blocking` there.
#[derive(Debug, Default, Clone)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> std::result::Result<Value, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Fatal(e.to_string()))?;
        let mut req = client.post(url).json(body);
        if let Some(token) = bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() || e.is_request() {
                TransportError::Transient(e.to_string())
            } else {
                TransportError::Fatal(e.to_string())
            }
        })?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(TransportError::Unauthorized(format!("HTTP {status}")));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(TransportError::Fatal(format!("HTTP {status}")));
        }
        resp.json::<Value>()
            .map_err(|e| TransportError::Fatal(format!("invalid JSON body: {e}")))
    }
}

/// OpenAI-compatible chat-completion client.
pub struct LiveGateway<T: Transport = HttpTransport> {
    cfg: GatewayConfig,
    transport: T,
}

impl LiveGateway<HttpTransport> {
    pub fn new(cfg: GatewayConfig) -> Result<Self> {
        Self::with_transport(cfg, HttpTransport)
    }
}

impl<T: Transport> LiveGateway<T> {
    pub fn with_transport(cfg: GatewayConfig, transport: T) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, transport })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    fn api_key(&self) -> Result<Option<String>> {
        if self.cfg.api_key_env.is_empty() {
            return Ok(None);
        }
        match std::env::var(&self.cfg.api_key_env) {
            Ok(v) if !v.is_empty() => Ok(Some(v)),
            _ => Err(GatewayError::Config(format!(
                "environment variable `{}` is not set",
                self.cfg.api_key_env
            ))),
        }
    }

    pub fn request_body(&self, system_prompt: &str, user_message: &str) -> Value {
        json!({
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_message},
            ],
            "temperature": self.cfg.temperature,
        })
    }

    pub fn url(&self) -> String {
        format!(
            "{}/chat/completions",
            self.cfg.endpoint_url.trim_end_matches('/')
        )
    }
}

fn reply_text(body: &Value) -> Option<String> {
    body.get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

impl<T: Transport> LlmGateway for LiveGateway<T> {
    fn complete(&self, system_prompt: &str, user_message: &str) -> Result<Completion> {
        let key = self.api_key()?;
        let body = self.request_body(system_prompt, user_message);
        let url = self.url();
        let timeout = Duration::from_secs_f64(self.cfg.timeout_secs);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self
                .transport
                .post_json(&url, key.as_deref(), &body, timeout)
            {
                Ok(resp) => {
                    return match reply_text(&resp) {
                        Some(text) => Ok(Completion { text, attempts }),
                        None => Err(GatewayError::Parse {
                            reason: "response has no choices[0].message.content".into(),
                            raw: resp.to_string(),
                        }),
                    };
                }
                Err(TransportError::Unauthorized(msg)) => {
                    return Err(GatewayError::Config(format!(
                        "endpoint rejected the credentials in `{}`: {msg}",
                        self.cfg.api_key_env
                    )));
                }
                Err(TransportError::Fatal(msg)) => return Err(GatewayError::Rejected(msg)),
                Err(TransportError::Transient(msg)) => {
                    if attempts > self.cfg.max_retries {
                        return Err(GatewayError::Exhausted {
                            attempts,
                            last: msg,
                        });
                    }
                    tracing::debug!(attempt = attempts, "transient gateway failure: {msg}");
                    let delay = self
                        .cfg
                        .backoff_ms
                        .saturating_mul(1 << (attempts - 1).min(16));
                    if delay > 0 {
                        std::thread::sleep(Duration::from_millis(delay));
                    }
                }
            }
        }
    }

    fn is_live(&self) -> bool {
        true
    }
}
