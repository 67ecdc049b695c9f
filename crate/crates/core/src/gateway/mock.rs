use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Completion, GatewayError, LlmGateway, Result};

/// One scripted reply.
///
/// With neither matcher set the entry matches any call. `call` is the
/// zero-based index of the gateway call; `contains` is tested against the
/// system prompt and user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call: Option<usize>,
    pub reply: String,
    /// Answer with a gateway failure carrying `reply` as the message.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fail: bool,
}

impl MockEntry {
    fn matches(&self, call: usize, system_prompt: &str, user_message: &str) -> bool {
        if let Some(n) = self.call {
            if n != call {
                return false;
            }
        }
        if let Some(needle) = &self.contains {
            if !system_prompt.contains(needle.as_str()) && !user_message.contains(needle.as_str()) {
                return false;
            }
        }
        true
    }
}

/// Ordered replies. Each entry is consumed at most once.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockScript {
    pub entries: Vec<MockEntry>,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reply(mut self, text: impl Into<String>) -> Self {
        self.entries.push(MockEntry {
            contains: None,
            call: None,
            reply: text.into(),
            fail: false,
        });
        self
    }

    pub fn when_contains(mut self, needle: impl Into<String>, text: impl Into<String>) -> Self {
        self.entries.push(MockEntry {
            contains: Some(needle.into()),
            call: None,
            reply: text.into(),
            fail: false,
        });
        self
    }

    pub fn on_call(mut self, call: usize, text: impl Into<String>) -> Self {
        self.entries.push(MockEntry {
            contains: None,
            call: Some(call),
            reply: text.into(),
            fail: false,
        });
        self
    }

    pub fn fail_when_contains(
        mut self,
        needle: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        self.entries.push(MockEntry {
            contains: Some(needle.into()),
            call: None,
            reply: message.into(),
            fail: true,
        });
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedCall {
    pub system_prompt: String,
    pub user_message: String,
}

#[derive(Debug)]
struct State {
    script: MockScript,
    used: Vec<bool>,
    calls: Vec<RecordedCall>,
}

/// Offline gateway replaying a [`MockScript`]. Calls are serialized behind a
/// lock so concurrent callers see one consistent script order.
#[derive(Debug)]
pub struct MockGateway {
    state: Mutex<State>,
}

impl MockGateway {
    pub fn new(script: MockScript) -> Self {
        let used = vec![false; script.len()];
        Self {
            state: Mutex::new(State {
                script,
                used,
                calls: Vec::new(),
            }),
        }
    }

    /// Every call seen so far, in order.
    pub fn calls(&self) -> Vec<RecordedCall> {
        self.state.lock().expect("mock lock").calls.clone()
    }

    pub fn remaining(&self) -> usize {
        self.state
            .lock()
            .expect("mock lock")
            .used
            .iter()
            .filter(|u| !**u)
            .count()
    }
}

impl LlmGateway for MockGateway {
    fn complete(&self, system_prompt: &str, user_message: &str) -> Result<Completion> {
        let mut st = self.state.lock().expect("mock lock");
        let call = st.calls.len();
        st.calls.push(RecordedCall {
            system_prompt: system_prompt.to_string(),
            user_message: user_message.to_string(),
        });
        let hit = st
            .script
            .entries
            .iter()
            .enumerate()
            .position(|(i, e)| !st.used[i] && e.matches(call, system_prompt, user_message));
        let Some(i) = hit else {
            return Err(GatewayError::ScriptExhausted { call });
        };
        st.used[i] = true;
        let entry = &st.script.entries[i];
        if entry.fail {
            return Err(GatewayError::Exhausted {
                attempts: 1,
                last: entry.reply.clone(),
            });
        }
        Ok(Completion {
            text: entry.reply.clone(),
            attempts: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replies_are_consumed_once() {
        let gw = MockGateway::new(MockScript::new().reply("first"));
        assert_eq!(gw.complete("s", "u").unwrap().text, "first");
        assert_eq!(
            gw.complete("s", "u"),
            Err(GatewayError::ScriptExhausted { call: 1 })
        );
    }

    #[test]
    fn matchers_select_entries() {
        let script = MockScript::new()
            .when_contains("guiding questions", "1. Q?")
            .on_call(0, "R0")
            .reply("fallback");
        let gw = MockGateway::new(script);
        assert_eq!(gw.complete("tutor", "hi").unwrap().text, "R0");
        assert_eq!(
            gw.complete("propose 5 guiding questions", "").unwrap().text,
            "1. Q?"
        );
        assert_eq!(gw.complete("anything", "").unwrap().text, "fallback");
        assert_eq!(gw.calls().len(), 3);
        assert_eq!(gw.remaining(), 0);
    }

    #[test]
    fn scripted_failure() {
        let gw = MockGateway::new(MockScript::new().fail_when_contains("x", "boom"));
        assert!(matches!(
            gw.complete("x", ""),
            Err(GatewayError::Exhausted { .. })
        ));
    }

    #[test]
    fn script_json_shape() {
        let json = r#"[{"contains": "tutor", "reply": "R"}, {"call": 3, "reply": "Q", "fail": true}, {"reply": "any"}]"#;
        let script: MockScript = serde_json::from_str(json).unwrap();
        assert_eq!(script.len(), 3);
        assert_eq!(script.entries[1].call, Some(3));
        assert!(script.entries[1].fail);
    }
}
