//! Stateful HTTP session service exposing the environments.
//!
//! Wire protocol (JSON):
//! - `POST /sessions` with either `{"case": {...}}` or
//!   `{"kind": "...", "mode": "...", "seed": N}` (plus optional `"budget"`)
//!   creates a session and returns the system prompt and initial feedback.
//! - `POST /sessions/{id}/step` with `{"action": N}` applies one action.
//!   An optional `"proposed"` field (integer or null) is what gets graded
//!   for adherence when it differs from the committed action — the
//!   teacher-guided arrangement. Malformed bodies are rejected without
//!   consuming a step; terminated sessions answer 409.
//! - `GET /sessions/{id}/transcript` returns every recorded step.
//! - `DELETE /sessions/{id}` discards the session.
//!
//! Follow flags are computed against the pre-step state with the same oracle
//! used by the in-process runner, so a client driving episodes over HTTP
//! reconstructs byte-identical transcripts.

use std::collections::HashMap;
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;
use uuid::Uuid;

use seqbench_core::oracle;
use seqbench_core::prompts::{render_feedback, system_prompt};
use seqbench_core::testgen;
use seqbench_core::{EnvKind, EnvState, Mode, Termination, TestCase, Validity};

#[derive(Default)]
pub struct ServiceState {
    sessions: Mutex<HashMap<Uuid, Arc<Mutex<Session>>>>,
}

struct Session {
    env: EnvState,
    steps: Vec<ServiceStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceStep {
    pub index: u32,
    pub action: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed: Option<i64>,
    pub validity: Validity,
    pub following: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    #[serde(default)]
    pub case: Option<TestCase>,
    #[serde(default)]
    pub kind: Option<EnvKind>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub budget: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: Uuid,
    pub case: TestCase,
    pub budget: u32,
    pub system_prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StepRequest {
    pub action: i64,
    /// Absent: grade `action` itself. Present-null: nothing was proposed
    /// (grades as not following). Present-integer: grade that proposal.
    #[serde(default)]
    pub proposed: Option<Option<i64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StepResponse {
    pub index: u32,
    pub validity: Validity,
    pub following: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptResponse {
    pub session_id: Uuid,
    pub case: TestCase,
    pub budget: u32,
    pub steps: Vec<ServiceStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (
        status,
        Json(ErrorBody {
            error: message.into(),
        }),
    )
        .into_response()
}

fn reject(rejection: JsonRejection) -> Response {
    error_response(
        StatusCode::UNPROCESSABLE_ENTITY,
        format!("malformed request body: {rejection}"),
    )
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route(
            "/sessions/{id}/step",
            post(step_session),
        )
        .route(
            "/sessions/{id}/transcript",
            get(session_transcript),
        )
        .route(
            "/sessions/{id}",
            axum::routing::delete(delete_session),
        )
        .with_state(state)
}

async fn create_session(
    State(state): State<Arc<ServiceState>>,
    payload: Result<Json<CreateRequest>, JsonRejection>,
) -> Response {
    let Json(request) = match payload {
        Ok(payload) => payload,
        Err(rejection) => return reject(rejection),
    };
    let case = match (&request.case, request.kind, request.mode, request.seed) {
        (Some(case), None, None, None) => case.clone(),
        (None, Some(kind), Some(mode), Some(seed)) => testgen::gen_case(kind, mode, seed),
        _ => {
            return error_response(
                StatusCode::UNPROCESSABLE_ENTITY,
                "provide either a full case or kind+mode+seed",
            )
        }
    };
    let budget = request.budget.unwrap_or(case.mode.step_budget());
    let (env, observation) = match EnvState::reset_with_budget(&case, budget) {
        Ok(pair) => pair,
        Err(error) => return error_response(StatusCode::UNPROCESSABLE_ENTITY, error.to_string()),
    };
    let text = render_feedback(case.kind, &observation);
    let response = CreateResponse {
        session_id: Uuid::new_v4(),
        case: case.clone(),
        budget,
        system_prompt: system_prompt(&case),
        observation: if text.is_empty() { None } else { Some(text) },
    };
    state.sessions.lock().expect("sessions lock").insert(
        response.session_id,
        Arc::new(Mutex::new(Session {
            env,
            steps: Vec::new(),
        })),
    );
    (StatusCode::CREATED, Json(response)).into_response()
}

fn lookup(state: &ServiceState, id: Uuid) -> Option<Arc<Mutex<Session>>> {
    state
        .sessions
        .lock()
        .expect("sessions lock")
        .get(&id)
        .cloned()
}

async fn step_session(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<Uuid>,
    payload: Result<Json<StepRequest>, JsonRejection>,
) -> Response {
    let Json(request) = match payload {
        Ok(payload) => payload,
        Err(rejection) => return reject(rejection),
    };
    let Some(session) = lookup(&state, id) else {
        return error_response(StatusCode::NOT_FOUND, format!("no session {id}"));
    };
    let mut session = session.lock().expect("session lock");
    if session.env.termination().is_some() {
        return error_response(
            StatusCode::CONFLICT,
            "session already terminated; no further steps are accepted",
        );
    }
    let graded = match request.proposed {
        None => Some(request.action),
        Some(proposal) => proposal,
    };
    let following = graded.is_some_and(|a| oracle::is_following(&session.env, a));
    let outcome = match session.env.step(request.action) {
        Ok(outcome) => outcome,
        Err(error) => return error_response(StatusCode::CONFLICT, error.to_string()),
    };
    let observation = outcome
        .observation
        .as_ref()
        .map(|obs| render_feedback(session.env.case().kind, obs))
        .filter(|text| !text.is_empty());
    let step = ServiceStep {
        index: session.steps.len() as u32 + 1,
        action: request.action,
        proposed: graded.filter(|_| request.proposed.is_some()),
        validity: outcome.validity,
        following,
        observation: observation.clone(),
        termination: outcome.termination,
    };
    session.steps.push(step.clone());
    let response = StepResponse {
        index: step.index,
        validity: step.validity,
        following: step.following,
        observation,
        termination: outcome.termination,
    };
    (StatusCode::OK, Json(response)).into_response()
}

async fn session_transcript(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<Uuid>,
) -> Response {
    let Some(session) = lookup(&state, id) else {
        return error_response(StatusCode::NOT_FOUND, format!("no session {id}"));
    };
    let session = session.lock().expect("session lock");
    let response = TranscriptResponse {
        session_id: id,
        case: session.env.case().clone(),
        budget: session.env.budget(),
        steps: session.steps.clone(),
        termination: session.env.termination(),
    };
    (StatusCode::OK, Json(response)).into_response()
}

async fn delete_session(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<Uuid>,
) -> Response {
    let removed = state
        .sessions
        .lock()
        .expect("sessions lock")
        .remove(&id)
        .is_some();
    if removed {
        StatusCode::NO_CONTENT.into_response()
    } else {
        error_response(StatusCode::NOT_FOUND, format!("no session {id}"))
    }
}

/// Serve until the shutdown receiver fires (or forever if it is dropped
/// without firing and the process keeps running).
async fn serve_until(
    listener: tokio::net::TcpListener,
    state: Arc<ServiceState>,
    shutdown: oneshot::Receiver<()>,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = shutdown.await;
        })
        .await
}

/// Blocking entry point for the CLI `serve` command; runs until ctrl-c.
pub fn serve_blocking(addr: &str) -> anyhow::Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        let state = Arc::new(ServiceState::default());
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

/// A service running on an OS thread with its own runtime, for tests and
/// in-process drivers. Dropping the handle shuts the server down.
pub struct ServiceHandle {
    pub base_url: String,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn spawn() -> anyhow::Result<ServiceHandle> {
        let std_listener = TcpListener::bind("127.0.0.1:0")?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = oneshot::channel();
        let thread = std::thread::spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("service runtime builds");
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener)
                    .expect("adopt bound listener");
                let state = Arc::new(ServiceState::default());
                serve_until(listener, state, rx)
                    .await
                    .expect("service runs");
            });
        });
        Ok(ServiceHandle {
            base_url: format!("http://{addr}"),
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}
