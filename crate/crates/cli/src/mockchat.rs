//! Loopback chat-completions endpoint for exercising the remote agent path
//! without a real model: wraps any in-process agent behind the same HTTP
//! dialect (`POST /v1/chat/completions`), with optional bearer-token
//! enforcement and scripted transient failures for retry testing.

use std::net::TcpListener;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::oneshot;

use seqbench_core::agents::Agent;
use seqbench_core::chat::{ChatMessage, Role};

pub struct MockChatState {
    agent: Arc<dyn Agent>,
    /// When set, requests must carry `Authorization: Bearer <this>`.
    expected_token: Option<String>,
    /// Respond 500 to this many requests before serving normally.
    fail_first: AtomicU64,
    hits: AtomicU64,
}

#[derive(Deserialize)]
struct WireMessage {
    role: String,
    content: String,
}

#[derive(Deserialize)]
struct CompletionRequest {
    #[allow(dead_code)]
    model: String,
    messages: Vec<WireMessage>,
}

async fn completions(
    State(state): State<Arc<MockChatState>>,
    headers: HeaderMap,
    Json(request): Json<CompletionRequest>,
) -> Response {
    state.hits.fetch_add(1, Ordering::SeqCst);
    if let Some(expected) = &state.expected_token {
        let presented = headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .unwrap_or_default();
        if presented != format!("Bearer {expected}") {
            return (
                StatusCode::UNAUTHORIZED,
                Json(serde_json::json!({ "error": "missing or wrong bearer token" })),
            )
                .into_response();
        }
    }
    if state
        .fail_first
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        return (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(serde_json::json!({ "error": "scripted transient failure" })),
        )
            .into_response();
    }
    let mut context = Vec::with_capacity(request.messages.len());
    for m in &request.messages {
        let role = match m.role.as_str() {
            "system" => Role::System,
            "user" => Role::User,
            "assistant" => Role::Assistant,
            other => {
                return (
                    StatusCode::UNPROCESSABLE_ENTITY,
                    Json(serde_json::json!({ "error": format!("unknown role {other:?}") })),
                )
                    .into_response()
            }
        };
        context.push(ChatMessage {
            role,
            content: m.content.clone(),
        });
    }
    match state.agent.respond(&context) {
        Ok(reply) => (
            StatusCode::OK,
            Json(serde_json::json!({
                "choices": [{ "message": { "role": "assistant", "content": reply } }]
            })),
        )
            .into_response(),
        Err(error) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(serde_json::json!({ "error": error.to_string() })),
        )
            .into_response(),
    }
}

pub struct MockChatHandle {
    /// Full URL of the completions endpoint.
    pub endpoint: String,
    state: Arc<MockChatState>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockChatHandle {
    pub fn spawn(
        agent: Arc<dyn Agent>,
        expected_token: Option<String>,
        fail_first: u64,
    ) -> anyhow::Result<MockChatHandle> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let state = Arc::new(MockChatState {
            agent,
            expected_token,
            fail_first: AtomicU64::new(fail_first),
            hits: AtomicU64::new(0),
        });
        let router_state = state.clone();
        let (tx, rx) = oneshot::channel();
        let thread = std::thread::spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("mock chat runtime builds");
            runtime.block_on(async move {
                let listener =
                    tokio::net::TcpListener::from_std(listener).expect("adopt bound listener");
                let app = Router::new()
                    .route("/v1/chat/completions", post(completions))
                    .with_state(router_state);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .expect("mock chat serves");
            });
        });
        Ok(MockChatHandle {
            endpoint: format!("http://{addr}/v1/chat/completions"),
            state,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn hits(&self) -> u64 {
        self.state.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockChatHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}
