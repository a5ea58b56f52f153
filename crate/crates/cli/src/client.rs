//! Service-backed episode driver: the same loop as the in-process runner,
//! with environment steps delegated to the HTTP session service. Contexts,
//! digests, and parsing happen client-side; validity, follow flags, feedback,
//! and termination come from the service. A run driven this way reproduces
//! the in-process transcript exactly (modulo step timings).

use std::time::Instant;

use anyhow::{bail, Context};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use uuid::Uuid;

use seqbench_core::agents::{Agent, AgentError, EpisodeView};
use seqbench_core::chat::ChatMessage;
use seqbench_core::runner::{
    build_context, chain_digest, make_ice_episodes, parse_action, Protocol, RunConfig,
};
use seqbench_core::transcript::{Transcript, TranscriptStep};
use seqbench_core::{Termination, TestCase, Validity};

use crate::service::{CreateResponse, ErrorBody, StepResponse, TranscriptResponse};

pub struct ServiceClient {
    base: String,
    http: Client,
}

impl ServiceClient {
    pub fn new(base_url: &str) -> anyhow::Result<ServiceClient> {
        Ok(ServiceClient {
            base: base_url.trim_end_matches('/').to_string(),
            http: Client::builder().build()?,
        })
    }

    fn check<T: serde::de::DeserializeOwned>(
        response: reqwest::blocking::Response,
        expected: StatusCode,
        what: &str,
    ) -> anyhow::Result<T> {
        let status = response.status();
        if status != expected {
            let detail = response
                .json::<ErrorBody>()
                .map(|b| b.error)
                .unwrap_or_else(|_| "(no error body)".into());
            bail!("{what}: expected {expected}, got {status}: {detail}");
        }
        response.json::<T>().with_context(|| format!("{what}: decode body"))
    }

    pub fn create_session(
        &self,
        case: &TestCase,
        budget: Option<u32>,
    ) -> anyhow::Result<CreateResponse> {
        let mut body = serde_json::json!({ "case": case });
        if let Some(budget) = budget {
            body["budget"] = serde_json::json!(budget);
        }
        let response = self
            .http
            .post(format!("{}/sessions", self.base))
            .json(&body)
            .send()?;
        Self::check(response, StatusCode::CREATED, "create session")
    }

    pub fn step(
        &self,
        id: Uuid,
        action: i64,
        proposed: Option<Option<i64>>,
    ) -> anyhow::Result<StepResponse> {
        let mut body = serde_json::json!({ "action": action });
        if let Some(graded) = proposed {
            body["proposed"] = serde_json::json!(graded);
        }
        let response = self
            .http
            .post(format!("{}/sessions/{id}/step", self.base))
            .json(&body)
            .send()?;
        Self::check(response, StatusCode::OK, "step session")
    }

    pub fn transcript(&self, id: Uuid) -> anyhow::Result<TranscriptResponse> {
        let response = self
            .http
            .get(format!("{}/sessions/{id}/transcript", self.base))
            .send()?;
        Self::check(response, StatusCode::OK, "fetch transcript")
    }

    pub fn delete(&self, id: Uuid) -> anyhow::Result<()> {
        let response = self
            .http
            .delete(format!("{}/sessions/{id}", self.base))
            .send()?;
        if response.status() != StatusCode::NO_CONTENT {
            bail!("delete session: got {}", response.status());
        }
        Ok(())
    }
}

/// Run one episode against the service, mirroring the in-process runner.
pub fn run_episode_via_service(
    client: &ServiceClient,
    agent: &dyn Agent,
    case: &TestCase,
    config: &RunConfig,
    donors: Option<&[TestCase]>,
) -> anyhow::Result<Transcript> {
    let examples = match config.protocol {
        Protocol::InContext { examples } => {
            let donors = donors.context("in-context protocol requires a donor set")?;
            make_ice_episodes(donors, examples, case)?
        }
        _ => Vec::new(),
    };
    let teacher_guided = config.protocol == Protocol::TeacherGuided;
    let created = client.create_session(case, config.budget)?;
    let session = created.session_id;
    let system = created.system_prompt;
    let mut live_turns = Vec::new();
    if let Some(text) = created.observation {
        live_turns.push(ChatMessage::user(text));
    }

    let mut transcript = Transcript {
        case: case.clone(),
        protocol: config.protocol,
        budget: created.budget,
        parse_policy: config.parse_policy,
        agent: agent.label(),
        steps: Vec::new(),
        termination: None,
        aborted: None,
    };
    let mut digest = String::new();

    while transcript.termination.is_none() {
        let context = build_context(&system, &examples, &live_turns);
        digest = chain_digest(&digest, &context);
        let started = Instant::now();
        let raw = match agent.respond(&context) {
            Ok(raw) => raw,
            Err(AgentError::Transport(message)) => {
                transcript.aborted = Some(message);
                client.delete(session)?;
                return Ok(transcript);
            }
            Err(error) => {
                transcript.aborted = Some(error.to_string());
                client.delete(session)?;
                return Ok(transcript);
            }
        };
        let elapsed_ms = started.elapsed().as_millis() as u64;
        let index = transcript.steps.len() as u32 + 1;
        let proposed = parse_action(&raw, config.parse_policy);

        if teacher_guided {
            let view = EpisodeView::from_messages(&context)
                .map_err(|e| anyhow::anyhow!("teacher view: {e}"))?;
            let committed = view
                .optimal_action()
                .context("teacher has no move in an unterminated episode")?;
            let response = client.step(session, committed, Some(proposed))?;
            transcript.steps.push(TranscriptStep {
                index,
                context_digest: digest.clone(),
                raw,
                action: proposed,
                committed: Some(committed),
                validity: response.validity,
                following: response.following,
                observation: response.observation.clone(),
                elapsed_ms,
            });
            live_turns.push(ChatMessage::assistant(committed.to_string()));
            if let Some(text) = response.observation {
                live_turns.push(ChatMessage::user(text));
            }
            transcript.termination = response.termination;
            continue;
        }

        match proposed {
            None => {
                transcript.steps.push(TranscriptStep {
                    index,
                    context_digest: digest.clone(),
                    raw,
                    action: None,
                    committed: None,
                    validity: Validity::Invalid,
                    following: false,
                    observation: None,
                    elapsed_ms,
                });
                transcript.termination = Some(Termination::InvalidResponse);
                client.delete(session)?;
                return Ok(transcript);
            }
            Some(action) => {
                let response = client.step(session, action, None)?;
                transcript.steps.push(TranscriptStep {
                    index,
                    context_digest: digest.clone(),
                    raw: raw.clone(),
                    action: Some(action),
                    committed: Some(action),
                    validity: response.validity,
                    following: response.following,
                    observation: response.observation.clone(),
                    elapsed_ms,
                });
                live_turns.push(ChatMessage::assistant(raw));
                if let Some(text) = response.observation {
                    live_turns.push(ChatMessage::user(text));
                }
                transcript.termination = response.termination;
            }
        }
    }

    // Sanity: the server saw the same episode we assembled.
    let server = client.transcript(session)?;
    if server.steps.len() != transcript.steps.len()
        || server.termination != transcript.termination
    {
        bail!(
            "client/server divergence: {} vs {} steps, {:?} vs {:?}",
            transcript.steps.len(),
            server.steps.len(),
            transcript.termination,
            server.termination
        );
    }
    client.delete(session)?;
    Ok(transcript)
}
