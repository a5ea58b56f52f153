//! Remote agent speaking the common chat-completions HTTP dialect:
//! `POST {endpoint}` with `{"model", "messages": [{"role", "content"}]}`,
//! reply read from `choices[0].message.content`.
//!
//! The bearer token is read from the environment variable named in the
//! config. The token value is held privately and never appears in labels,
//! `Debug` output, errors, or logs — only the variable's name does.

use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentError};
use crate::chat::ChatMessage;

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Environment variable to read the bearer token from. If the variable
    /// is unset or empty, requests are sent without authorization (useful
    /// against loopback test servers).
    pub token_env: String,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    /// Additional attempts after the first, on transport errors, HTTP 429,
    /// and HTTP 5xx.
    pub max_retries: u32,
    pub timeout_secs: u64,
}

pub struct RemoteChatAgent {
    config: RemoteConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for RemoteChatAgent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteChatAgent")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .field("token_env", &self.config.token_env)
            .field("token", &self.token.as_ref().map(|_| "[redacted]"))
            .finish_non_exhaustive()
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

const BACKOFF_BASE_MS: u64 = 250;
const BACKOFF_CAP_MS: u64 = 4_000;

impl RemoteChatAgent {
    pub fn new(config: RemoteConfig) -> Result<RemoteChatAgent, AgentError> {
        let token = std::env::var(&config.token_env)
            .ok()
            .filter(|t| !t.is_empty());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| AgentError::Config(format!("http client: {e}")))?;
        Ok(RemoteChatAgent {
            config,
            token,
            client,
        })
    }

    fn attempt(&self, body: &CompletionRequest<'_>) -> Result<String, (bool, String)> {
        let mut request = self.client.post(&self.config.endpoint).json(body);
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| (true, format!("request failed: {e}")))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err((true, format!("endpoint returned {status}")));
        }
        if !status.is_success() {
            return Err((false, format!("endpoint returned {status}")));
        }
        let parsed: CompletionResponse = response
            .json()
            .map_err(|e| (false, format!("unreadable response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| (false, "response carried no message content".into()))
    }
}

impl Agent for RemoteChatAgent {
    fn label(&self) -> String {
        format!("remote:{}@{}", self.config.model, self.config.endpoint)
    }

    fn respond(&self, context: &[ChatMessage]) -> Result<String, AgentError> {
        let body = CompletionRequest {
            model: &self.config.model,
            messages: context
                .iter()
                .map(|m| WireMessage {
                    role: m.role.name(),
                    content: &m.content,
                })
                .collect(),
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let backoff =
                    BACKOFF_CAP_MS.min(BACKOFF_BASE_MS.saturating_mul(1 << (attempt - 1).min(16)));
                thread::sleep(Duration::from_millis(backoff));
            }
            match self.attempt(&body) {
                Ok(reply) => return Ok(reply),
                Err((retryable, message)) => {
                    last_error = message;
                    if !retryable {
                        break;
                    }
                }
            }
        }
        Err(AgentError::Transport(format!(
            "{} after {} attempt(s): {last_error}",
            self.config.endpoint,
            self.config.max_retries + 1
        )))
    }
}
