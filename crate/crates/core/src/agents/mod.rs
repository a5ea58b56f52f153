//! Agents: anything that maps a rendered chat context to a textual reply.
//!
//! Scripted agents are pure functions of `(own parameters, rendered context)`
//! and read episode state only from the conversation text via [`EpisodeView`],
//! never from privileged environment internals — the same footing a remote
//! model gets. The remote agent speaks an HTTP chat-completions dialect.

pub mod remote;
pub mod scripted;
pub mod view;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::ChatMessage;
pub use remote::RemoteChatAgent;
pub use scripted::{InvalidAfterAgent, NoisyAgent, OracleAgent, RandomAgent, SilentAgent};
pub use view::EpisodeView;

#[derive(Debug, Error)]
pub enum AgentError {
    /// Network/endpoint failure after exhausting retries. The message never
    /// contains credentials.
    #[error("transport failure: {0}")]
    Transport(String),
    /// The chat context could not be interpreted as an episode.
    #[error("unreadable episode context: {0}")]
    View(String),
    #[error("bad agent configuration: {0}")]
    Config(String),
}

pub trait Agent: Send + Sync {
    /// Stable identifier recorded in transcripts and manifests. Must never
    /// contain credentials.
    fn label(&self) -> String;
    /// Produce the raw reply to the rendered conversation.
    fn respond(&self, context: &[ChatMessage]) -> Result<String, AgentError>;
}

fn default_max_retries() -> u32 {
    4
}

fn default_timeout_secs() -> u64 {
    120
}

/// Declarative agent configuration (CLI / manifest form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentSpec {
    Oracle,
    Random {
        seed: u64,
    },
    Noisy {
        seed: u64,
        p_follow: f64,
    },
    InvalidAfter {
        steps: u32,
    },
    Silent,
    Remote {
        endpoint: String,
        model: String,
        /// Name of the environment variable holding the bearer token. Only
        /// the variable name is ever stored or printed.
        token_env: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_tokens: Option<u32>,
        #[serde(default = "default_max_retries")]
        max_retries: u32,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

impl AgentSpec {
    /// Parse the compact CLI form: `oracle`, `silent`, `random:SEED`,
    /// `noisy:SEED:P_FOLLOW`, `invalid-after:STEPS`. The remote agent is
    /// configured through dedicated flags, not this string.
    pub fn parse_cli(s: &str) -> Result<AgentSpec, AgentError> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let bad = |msg: &str| Err(AgentError::Config(format!("agent '{s}': {msg}")));
        match (head, rest.as_slice()) {
            ("oracle", []) => Ok(AgentSpec::Oracle),
            ("silent", []) => Ok(AgentSpec::Silent),
            ("random", [seed]) => match seed.parse() {
                Ok(seed) => Ok(AgentSpec::Random { seed }),
                Err(_) => bad("seed must be an unsigned integer"),
            },
            ("noisy", [seed, p]) => match (seed.parse(), p.parse::<f64>()) {
                (Ok(seed), Ok(p_follow)) if (0.0..=1.0).contains(&p_follow) => {
                    Ok(AgentSpec::Noisy { seed, p_follow })
                }
                _ => bad("expected noisy:SEED:P_FOLLOW with P_FOLLOW in [0, 1]"),
            },
            ("invalid-after", [steps]) => match steps.parse() {
                Ok(steps) => Ok(AgentSpec::InvalidAfter { steps }),
                Err(_) => bad("steps must be an unsigned integer"),
            },
            _ => bad(
                "expected oracle | silent | random:SEED | noisy:SEED:P_FOLLOW | \
                 invalid-after:STEPS",
            ),
        }
    }

    /// Identifier recorded in transcripts. Credential-free by construction.
    pub fn label(&self) -> String {
        match self {
            AgentSpec::Oracle => "oracle".into(),
            AgentSpec::Random { seed } => format!("random:{seed}"),
            AgentSpec::Noisy { seed, p_follow } => format!("noisy:{seed}:{p_follow}"),
            AgentSpec::InvalidAfter { steps } => format!("invalid-after:{steps}"),
            AgentSpec::Silent => "silent".into(),
            AgentSpec::Remote {
                endpoint, model, ..
            } => format!("remote:{model}@{endpoint}"),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Agent>, AgentError> {
        match self {
            AgentSpec::Oracle => Ok(Box::new(OracleAgent)),
            AgentSpec::Random { seed } => Ok(Box::new(RandomAgent::new(*seed))),
            AgentSpec::Noisy { seed, p_follow } => {
                Ok(Box::new(NoisyAgent::new(*seed, *p_follow)?))
            }
            AgentSpec::InvalidAfter { steps } => Ok(Box::new(InvalidAfterAgent::new(*steps))),
            AgentSpec::Silent => Ok(Box::new(SilentAgent)),
            AgentSpec::Remote {
                endpoint,
                model,
                token_env,
                temperature,
                max_tokens,
                max_retries,
                timeout_secs,
            } => Ok(Box::new(RemoteChatAgent::new(remote::RemoteConfig {
                endpoint: endpoint.clone(),
                model: model.clone(),
                token_env: token_env.clone(),
                temperature: *temperature,
                max_tokens: *max_tokens,
                max_retries: *max_retries,
                timeout_secs: *timeout_secs,
            })?)),
        }
    }
}
