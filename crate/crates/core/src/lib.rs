//! Benchmark harness for evaluating sequential decision-making of chat agents in
//! text-interactive algorithmic environments.
//!
//! Six environments are provided: number guessing (`guess_num`, embodied skin
//! `coin`) and tree traversal under DFS/BFS rules (`dfs`/`bfs`, embodied skins
//! `cave_dfs`/`cave_bfs`). Episodes are driven step by step: the environment
//! reveals state only through textual feedback, the agent replies with an
//! integer action, and a known-optimal policy (the oracle) grades every step.
//!
//! Layers, bottom up:
//! - [`env`]: test-case payloads and environment state machines.
//! - [`prompts`]: frozen system-prompt and feedback templates (text <-> structured).
//! - [`testgen`]: seeded procedural case generation and the test-set file format.
//! - [`oracle`]: optimal policies, per-step "following" checks, step-count bounds.
//! - [`metrics`]: goal/policy/adherence metrics and cross-run aggregation.
//! - [`chat`], [`transcript`], [`runner`]: conversation assembly, persistent episode
//!   records, and the evaluation protocols (zero-shot, in-context examples,
//!   teacher-guided).
//! - [`agents`]: scripted reference agents and a remote chat-completion client.

pub mod agents;
pub mod chat;
pub mod env;
pub mod metrics;
pub mod oracle;
pub mod prompts;
pub mod runner;
pub mod testgen;
pub mod transcript;

pub use env::{
    CasePayload, Comparison, EnvError, EnvKind, EnvState, Family, Mode, Observation, Skin,
    StepOutcome, Termination, TestCase, Validity,
};
