//! Episode execution: prompt/context assembly, the three evaluation protocols,
//! reply parsing, and parallel suite runs.
//!
//! Protocols:
//! - zero-shot: system prompt plus the live conversation only.
//! - in-context (k): k oracle-played example episodes from donor cases are
//!   rendered into the context ahead of the live episode, each preceded by an
//!   `[Example interaction]` marker, with `[Your turn]` before the live turns.
//! - teacher-guided: the agent's proposal is recorded and graded each step,
//!   but the oracle's action is committed, so the environment walks the
//!   optimal path for exactly `min(k_max, budget)` steps and the context
//!   always shows oracle actions in prior assistant turns.

use std::sync::OnceLock;
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{Agent, AgentError};
use crate::chat::{merge_adjacent, render_for_digest, ChatMessage};
use crate::env::{EnvError, EnvState, Observation, TestCase, Validity};
use crate::metrics::{score_actions, EpisodeMetrics};
use crate::oracle;
use crate::prompts::{render_feedback, system_prompt, EXAMPLE_BOUNDARY, LIVE_BOUNDARY};
use crate::transcript::{Transcript, TranscriptStep};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("in-context protocol requires a donor set")]
    DonorsRequired,
    #[error("need {needed} donor cases distinct from the live case, found {found}")]
    NotEnoughDonors { needed: usize, found: usize },
    #[error("donor case (seed {seed}) has kind/mode {found}, expected {expected}")]
    DonorMismatch {
        seed: u64,
        found: String,
        expected: String,
    },
    #[error("episode produced no oracle move before termination")]
    OracleStuck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    ZeroShot,
    InContext { examples: u32 },
    TeacherGuided,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::ZeroShot => write!(f, "zero_shot"),
            Protocol::InContext { examples } => write!(f, "in_context_{examples}"),
            Protocol::TeacherGuided => write!(f, "teacher_guided"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsePolicy {
    /// First maximal decimal-integer token anywhere in the reply, optional
    /// sign, comma grouping normalized.
    #[default]
    Lenient,
    /// The whole trimmed reply must be one integer token.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub protocol: Protocol,
    /// Step budget override; defaults to the mode's budget.
    pub budget: Option<u32>,
    pub parse_policy: ParsePolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            protocol: Protocol::ZeroShot,
            budget: None,
            parse_policy: ParsePolicy::Lenient,
        }
    }
}

fn int_token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[+-]?\d+(?:,\d{3})*").expect("static regex compiles"))
}

/// Extract the action integer from an agent reply. Returns `None` when the
/// reply carries no usable integer (a parse failure).
pub fn parse_action(raw: &str, policy: ParsePolicy) -> Option<i64> {
    let token = match policy {
        ParsePolicy::Lenient => int_token_regex().find(raw)?.as_str().to_string(),
        ParsePolicy::Strict => {
            let trimmed = raw.trim();
            let m = int_token_regex().find(trimmed)?;
            if m.start() != 0 || m.end() != trimmed.len() {
                return None;
            }
            m.as_str().to_string()
        }
    };
    token.replace(',', "").parse::<i64>().ok()
}

/// One oracle-played donor episode rendered as conversation turns
/// (environment turns as user, oracle actions as assistant; no markers).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedEpisode {
    pub case: TestCase,
    pub turns: Vec<ChatMessage>,
}

fn render_oracle_episode(case: &TestCase) -> Result<RenderedEpisode, RunError> {
    let (mut state, reset_obs) = EnvState::reset(case)?;
    let mut turns = Vec::new();
    push_env_turn(&mut turns, case, &reset_obs);
    while state.termination().is_none() {
        let action = oracle::optimal_action(&state).ok_or(RunError::OracleStuck)?;
        let outcome = state.step(action)?;
        turns.push(ChatMessage::assistant(action.to_string()));
        if let Some(obs) = &outcome.observation {
            push_env_turn(&mut turns, case, obs);
        }
    }
    Ok(RenderedEpisode {
        case: case.clone(),
        turns,
    })
}

fn push_env_turn(turns: &mut Vec<ChatMessage>, case: &TestCase, observation: &Observation) {
    let text = render_feedback(case.kind, observation);
    if !text.is_empty() {
        turns.push(ChatMessage::user(text));
    }
}

/// Build the in-context example episodes for a live case: the first `k` donors
/// whose content differs from the live case, each played to completion by the
/// oracle. Donors must match the live case's kind and mode.
pub fn make_ice_episodes(
    donors: &[TestCase],
    k: u32,
    live: &TestCase,
) -> Result<Vec<RenderedEpisode>, RunError> {
    let live_key = live.content_key();
    let mut episodes = Vec::with_capacity(k as usize);
    for donor in donors {
        if episodes.len() == k as usize {
            break;
        }
        if donor.kind != live.kind || donor.mode != live.mode {
            return Err(RunError::DonorMismatch {
                seed: donor.seed,
                found: format!("{}/{}", donor.kind, donor.mode),
                expected: format!("{}/{}", live.kind, live.mode),
            });
        }
        if donor.content_key() == live_key {
            continue;
        }
        episodes.push(render_oracle_episode(donor)?);
    }
    if episodes.len() < k as usize {
        return Err(RunError::NotEnoughDonors {
            needed: k as usize,
            found: episodes.len(),
        });
    }
    Ok(episodes)
}

/// Assemble the full model-visible context: system prompt, example episodes
/// with boundary markers, then the live turns. Adjacent same-role messages are
/// merged so the result alternates strictly after the system turn.
pub fn build_context(
    system: &str,
    examples: &[RenderedEpisode],
    live_turns: &[ChatMessage],
) -> Vec<ChatMessage> {
    let mut messages = vec![ChatMessage::system(system)];
    for example in examples {
        messages.push(ChatMessage::user(EXAMPLE_BOUNDARY));
        messages.extend(example.turns.iter().cloned());
    }
    if !examples.is_empty() {
        messages.push(ChatMessage::user(LIVE_BOUNDARY));
    }
    messages.extend(live_turns.iter().cloned());
    merge_adjacent(messages)
}

/// Rolling context digest: each step hashes the previous digest together with
/// an injective rendering of the full context, so any two runs with equal
/// digests saw byte-identical conversations.
pub fn chain_digest(previous: &str, context: &[ChatMessage]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(previous.as_bytes());
    hasher.update(render_for_digest(context).as_bytes());
    hex::encode(hasher.finalize())
}

/// Run one episode of `agent` on `case` under `config`.
///
/// Returns a transcript even on transport failure (marked `aborted`); real
/// errors are reserved for invalid cases or protocol misconfiguration.
pub fn run_episode(
    agent: &dyn Agent,
    case: &TestCase,
    config: &RunConfig,
    donors: Option<&[TestCase]>,
) -> Result<Transcript, RunError> {
    let budget = config.budget.unwrap_or(case.mode.step_budget());
    let examples = match config.protocol {
        Protocol::InContext { examples } => {
            let donors = donors.ok_or(RunError::DonorsRequired)?;
            make_ice_episodes(donors, examples, case)?
        }
        _ => Vec::new(),
    };
    let teacher_guided = config.protocol == Protocol::TeacherGuided;
    let (mut state, reset_obs) = EnvState::reset_with_budget(case, budget)?;
    let system = system_prompt(case);
    let mut live_turns = Vec::new();
    push_env_turn(&mut live_turns, case, &reset_obs);

    let mut transcript = Transcript {
        case: case.clone(),
        protocol: config.protocol,
        budget,
        parse_policy: config.parse_policy,
        agent: agent.label(),
        steps: Vec::new(),
        termination: None,
        aborted: None,
    };
    let mut digest = String::new();

    while state.termination().is_none() {
        let context = build_context(&system, &examples, &live_turns);
        digest = chain_digest(&digest, &context);
        let started = Instant::now();
        let raw = match agent.respond(&context) {
            Ok(raw) => raw,
            Err(AgentError::Transport(message)) => {
                transcript.aborted = Some(message);
                return Ok(transcript);
            }
            Err(error) => {
                transcript.aborted = Some(error.to_string());
                return Ok(transcript);
            }
        };
        let elapsed_ms = started.elapsed().as_millis() as u64;
        let index = transcript.steps.len() as u32 + 1;
        let proposed = parse_action(&raw, config.parse_policy);

        if teacher_guided {
            let following = proposed.is_some_and(|a| oracle::is_following(&state, a));
            let committed = oracle::optimal_action(&state).ok_or(RunError::OracleStuck)?;
            let outcome = state.step(committed)?;
            debug_assert_eq!(outcome.validity, Validity::Valid);
            let observation = outcome
                .observation
                .as_ref()
                .map(|obs| render_feedback(case.kind, obs));
            transcript.steps.push(TranscriptStep {
                index,
                context_digest: digest.clone(),
                raw,
                action: proposed,
                committed: Some(committed),
                validity: outcome.validity,
                following,
                observation: observation.clone(),
                elapsed_ms,
            });
            // Teacher guidance rewrites history: the context shows the
            // committed oracle action, not what the agent proposed.
            live_turns.push(ChatMessage::assistant(committed.to_string()));
            if let Some(text) = observation {
                if !text.is_empty() {
                    live_turns.push(ChatMessage::user(text));
                }
            }
            transcript.termination = state.termination();
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
                transcript.termination = Some(crate::env::Termination::InvalidResponse);
                return Ok(transcript);
            }
            Some(action) => {
                let following = oracle::is_following(&state, action);
                let outcome = state.step(action)?;
                let observation = outcome
                    .observation
                    .as_ref()
                    .map(|obs| render_feedback(case.kind, obs));
                transcript.steps.push(TranscriptStep {
                    index,
                    context_digest: digest.clone(),
                    raw: raw.clone(),
                    action: Some(action),
                    committed: Some(action),
                    validity: outcome.validity,
                    following,
                    observation: observation.clone(),
                    elapsed_ms,
                });
                live_turns.push(ChatMessage::assistant(raw));
                if let Some(text) = observation {
                    if !text.is_empty() {
                        live_turns.push(ChatMessage::user(text));
                    }
                }
                transcript.termination = state.termination();
            }
        }
    }
    Ok(transcript)
}

/// Score a finished episode by replaying its actions (shared live/offline path).
pub fn score_transcript(transcript: &Transcript) -> Result<EpisodeMetrics, EnvError> {
    score_actions(
        &transcript.case,
        transcript.budget,
        &transcript.scored_actions(),
    )
}

/// Run a whole case list with bounded parallelism, preserving case order.
pub fn run_cases(
    agent: &dyn Agent,
    cases: &[TestCase],
    config: &RunConfig,
    donors: Option<&[TestCase]>,
    parallelism: usize,
) -> Result<Vec<Transcript>, RunError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool builds");
    pool.install(|| {
        cases
            .par_iter()
            .map(|case| run_episode(agent, case, config, donors))
            .collect()
    })
}
