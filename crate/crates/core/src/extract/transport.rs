//! Chat-completion transports: OpenAI-compatible HTTP and fixture playback.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::{ChatMessage, Part};
use super::ClientConfig;

#[derive(Debug, Error, PartialEq)]
pub enum TransportError {
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("request failed: {0}")]
    Http(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("no fixture transcript for case {0}")]
    NoTranscript(String),
}

pub trait ChatTransport: Sync {
    fn complete(&self, case_id: &str, messages: &[ChatMessage]) -> Result<String, TransportError>;
}

/// Request body in the OpenAI chat-completions layout; images travel as
/// base64 data URLs.
pub fn request_body(model: &str, messages: &[ChatMessage]) -> Value {
    let msgs: Vec<Value> = messages
        .iter()
        .map(|m| {
            let content: Vec<Value> = m
                .parts
                .iter()
                .map(|p| match p {
                    Part::Text(t) => json!({"type": "text", "text": t}),
                    Part::Image { media_type, data } => json!({
                        "type": "image_url",
                        "image_url": {"url": format!("data:{media_type};base64,{}", STANDARD.encode(data))}
                    }),
                })
                .collect();
            json!({"role": m.role.as_str(), "content": content})
        })
        .collect();
    json!({"model": model, "messages": msgs, "temperature": 0})
}

pub fn reply_text(body: &str) -> Result<String, TransportError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| TransportError::BadResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::BadResponse("missing choices[0].message.content".into()))
}

pub struct HttpTransport {
    endpoint: String,
    model: String,
    api_key_env: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    /// Builds the client; no connection is opened until the first request.
    pub fn new(cfg: &ClientConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s)))
            .build()
            .into();
        Self {
            endpoint: cfg.endpoint_url.clone(),
            model: cfg.model_name.clone(),
            api_key_env: cfg.api_key_env.clone(),
            agent,
        }
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, _case_id: &str, messages: &[ChatMessage]) -> Result<String, TransportError> {
        let key = std::env::var(&self.api_key_env)
            .map_err(|_| TransportError::MissingApiKey(self.api_key_env.clone()))?;
        let body = request_body(&self.model, messages).to_string();
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .content_type("application/json")
            .send(body)
            .map_err(|e| TransportError::Http(e.to_string()))?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Http(e.to_string()))?;
        reply_text(&text)
    }
}

/// Replays recorded replies per case; once a transcript runs out its last
/// reply repeats.
#[derive(Debug, Default)]
pub struct FixtureTransport {
    replies: BTreeMap<String, Vec<String>>,
    cursor: Mutex<BTreeMap<String, usize>>,
}

impl FixtureTransport {
    pub fn new(replies: BTreeMap<String, Vec<String>>) -> Self {
        Self {
            replies,
            cursor: Mutex::new(BTreeMap::new()),
        }
    }

    /// Transcript file: a JSON object mapping case id to a list of replies.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    /// Requests served so far for `case_id`.
    pub fn calls(&self, case_id: &str) -> usize {
        self.cursor.lock().expect("cursor lock").get(case_id).copied().unwrap_or(0)
    }
}

impl ChatTransport for FixtureTransport {
    fn complete(&self, case_id: &str, _messages: &[ChatMessage]) -> Result<String, TransportError> {
        let replies = self
            .replies
            .get(case_id)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| TransportError::NoTranscript(case_id.to_string()))?;
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let n = cursor.entry(case_id.to_string()).or_insert(0);
        let reply = replies[(*n).min(replies.len() - 1)].clone();
        *n += 1;
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::prompt::Role;

    #[test]
    fn fixture_repeats_last_reply() {
        let t = FixtureTransport::from_json(r#"{"a": ["one", "two"]}"#).unwrap();
        let got: Vec<String> = (0..3).map(|_| t.complete("a", &[]).unwrap()).collect();
        assert_eq!(got, ["one", "two", "two"]);
        assert_eq!(t.calls("a"), 3);
        assert_eq!(t.complete("b", &[]), Err(TransportError::NoTranscript("b".into())));
    }

    #[test]
    fn body_layout() {
        let m = ChatMessage {
            role: Role::User,
            parts: vec![
                Part::Text("hi".into()),
                Part::Image {
                    media_type: "image/png".into(),
                    data: vec![1, 2, 3],
                },
            ],
        };
        let b = request_body("m", &[m]);
        assert_eq!(b["messages"][0]["content"][1]["image_url"]["url"], "data:image/png;base64,AQID");
        assert_eq!(b["model"], "m");
    }

    #[test]
    fn reply_extraction() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"x: 1"}}]}"#;
        assert_eq!(reply_text(body).unwrap(), "x: 1");
        assert!(reply_text("{}").is_err());
    }
}
