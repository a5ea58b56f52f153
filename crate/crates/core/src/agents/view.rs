//! Text-only reconstruction of episode state from a rendered chat context.
//!
//! Scripted agents see exactly what a remote model sees: the system prompt
//! and the conversation. [`EpisodeView`] recovers the environment kind, the
//! feedback-implied guessing interval, and the announced part of the graph
//! purely from that text, so scripted play exercises the real prompt/feedback
//! loop rather than bypassing it.

use std::collections::{BTreeMap, BTreeSet};

use crate::agents::AgentError;
use crate::chat::{ChatMessage, Role};
use crate::env::{Comparison, EnvKind, Family, Observation};
use crate::oracle::optimal_guess;
use crate::prompts::{detect_kind, parse_feedback, prompt_bounds, LIVE_BOUNDARY};
use crate::runner::{parse_action, ParsePolicy};

#[derive(Debug, Clone)]
pub struct EpisodeView {
    pub kind: EnvKind,
    /// Full range stated in the system prompt (guess family only).
    pub prompt_bounds: Option<(i64, i64)>,
    /// Feedback-narrowed interval containing the target (guess family only).
    pub interval: Option<(i64, i64)>,
    pub solved: bool,
    /// Number of assistant turns in the live episode so far.
    pub steps_taken: usize,
    pub current: Option<usize>,
    pub visited: BTreeSet<usize>,
    /// Adjacency lists announced so far, keyed by visited node.
    pub known_adjacency: BTreeMap<usize, Vec<usize>>,
    /// Node the walk was at when each node was first announced.
    pub entry_parent: BTreeMap<usize, usize>,
    /// Distance from the start node, derived from announcement order.
    pub depth: BTreeMap<usize, usize>,
    /// Most recent parseable guess, awaiting its comparison feedback.
    last_guess: Option<i64>,
}

fn view_err(message: impl Into<String>) -> AgentError {
    AgentError::View(message.into())
}

impl EpisodeView {
    /// Interpret a rendered context. Only the live episode — everything after
    /// the last `[Your turn]` marker, or the whole conversation when no
    /// in-context examples are present — contributes to the state.
    pub fn from_messages(context: &[ChatMessage]) -> Result<EpisodeView, AgentError> {
        let system = context
            .iter()
            .find(|m| m.role == Role::System)
            .ok_or_else(|| view_err("context has no system message"))?;
        let kind = detect_kind(&system.content)
            .ok_or_else(|| view_err("system prompt does not match a known environment"))?;
        let bounds = if kind.family() == Family::Guess {
            Some(prompt_bounds(kind, &system.content).ok_or_else(|| {
                view_err("guessing prompt does not state the number range")
            })?)
        } else {
            None
        };

        let mut view = EpisodeView {
            kind,
            prompt_bounds: bounds,
            interval: bounds,
            solved: false,
            steps_taken: 0,
            current: None,
            visited: BTreeSet::new(),
            known_adjacency: BTreeMap::new(),
            entry_parent: BTreeMap::new(),
            depth: BTreeMap::new(),
            last_guess: None,
        };

        for (role, text) in live_turns(context) {
            match role {
                Role::System => {}
                Role::Assistant => {
                    view.steps_taken += 1;
                    view.note_action(&text);
                }
                Role::User => view.apply_feedback(&text)?,
            }
        }
        Ok(view)
    }

    fn note_action(&mut self, text: &str) {
        if self.kind.family() == Family::Guess {
            self.last_guess = parse_action(text, ParsePolicy::Lenient);
        }
    }

    fn apply_feedback(&mut self, text: &str) -> Result<(), AgentError> {
        let observation = parse_feedback(self.kind, text)
            .ok_or_else(|| view_err(format!("unrecognized feedback: {text:?}")))?;
        match observation {
            Observation::Empty => {}
            Observation::Comparison { comparison } => {
                let guess = self
                    .last_guess
                    .ok_or_else(|| view_err("comparison feedback without a preceding guess"))?;
                let (lo, hi) = self
                    .interval
                    .ok_or_else(|| view_err("comparison feedback in a non-guessing episode"))?;
                let next = match comparison {
                    Comparison::TargetBigger => (lo.max(guess + 1), hi),
                    Comparison::TargetLower => (lo, hi.min(guess - 1)),
                    Comparison::Correct => {
                        self.solved = true;
                        (guess, guess)
                    }
                };
                self.interval = Some(next);
            }
            Observation::Node { id, adjacent } => {
                if !self.visited.contains(&id) {
                    if let Some(previous) = self.current {
                        self.entry_parent.insert(id, previous);
                    }
                    let depth = adjacent
                        .iter()
                        .filter_map(|n| self.depth.get(n))
                        .min()
                        .map_or(0, |d| d + 1);
                    self.depth.insert(id, depth);
                    self.visited.insert(id);
                }
                self.known_adjacency.insert(id, adjacent);
                self.current = Some(id);
            }
        }
        Ok(())
    }

    /// Neighbors of the current node (the legal depth-first moves).
    pub fn current_neighbors(&self) -> Vec<usize> {
        self.current
            .and_then(|c| self.known_adjacency.get(&c).cloned())
            .unwrap_or_default()
    }

    /// Unvisited nodes adjacent to the visited set (the legal breadth-first
    /// moves), ascending.
    pub fn frontier(&self) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for node in &self.visited {
            if let Some(adjacent) = self.known_adjacency.get(node) {
                out.extend(adjacent.iter().filter(|n| !self.visited.contains(n)));
            }
        }
        out.into_iter().collect()
    }

    fn frontier_depth(&self, node: usize) -> usize {
        self.visited
            .iter()
            .filter(|v| {
                self.known_adjacency
                    .get(v)
                    .is_some_and(|adj| adj.contains(&node))
            })
            .filter_map(|v| self.depth.get(v))
            .min()
            .map_or(usize::MAX, |d| d + 1)
    }

    /// Every action the environment would accept right now, ascending. For
    /// the guess family the interval is too large to enumerate; use
    /// [`EpisodeView::interval`] instead.
    pub fn valid_tree_actions(&self) -> Vec<i64> {
        match self.kind.family() {
            Family::Guess => Vec::new(),
            Family::Dfs => self.current_neighbors().iter().map(|&n| n as i64).collect(),
            Family::Bfs => self.frontier().iter().map(|&n| n as i64).collect(),
        }
    }

    /// Actions consistent with the prescribed algorithm, ascending.
    pub fn following_actions(&self) -> Vec<i64> {
        match self.kind.family() {
            Family::Guess => match self.interval {
                Some((lo, hi)) if !self.solved && lo <= hi => vec![optimal_guess(lo, hi)],
                _ => Vec::new(),
            },
            Family::Dfs => {
                let Some(current) = self.current else {
                    return Vec::new();
                };
                let unvisited: Vec<i64> = self
                    .current_neighbors()
                    .iter()
                    .filter(|n| !self.visited.contains(n))
                    .map(|&n| n as i64)
                    .collect();
                if !unvisited.is_empty() {
                    unvisited
                } else {
                    self.entry_parent
                        .get(&current)
                        .map(|&p| vec![p as i64])
                        .unwrap_or_default()
                }
            }
            Family::Bfs => {
                let frontier = self.frontier();
                let Some(min_depth) = frontier.iter().map(|&n| self.frontier_depth(n)).min()
                else {
                    return Vec::new();
                };
                frontier
                    .into_iter()
                    .filter(|&n| self.frontier_depth(n) == min_depth)
                    .map(|n| n as i64)
                    .collect()
            }
        }
    }

    /// The canonical optimal move: the midpoint guess, or the smallest-id
    /// following node.
    pub fn optimal_action(&self) -> Option<i64> {
        self.following_actions().into_iter().next()
    }
}

/// Extract `(role, text)` turns belonging to the live episode: everything
/// after the final `[Your turn]` marker, or all non-system turns when no
/// marker is present. Merged boundary messages are split at the marker.
fn live_turns(context: &[ChatMessage]) -> Vec<(Role, String)> {
    let mut boundary: Option<(usize, usize)> = None;
    for (i, message) in context.iter().enumerate() {
        if let Some(pos) = message.content.rfind(LIVE_BOUNDARY) {
            boundary = Some((i, pos + LIVE_BOUNDARY.len()));
        }
    }
    let mut turns = Vec::new();
    match boundary {
        Some((index, offset)) => {
            let tail = context[index].content[offset..].trim();
            if !tail.is_empty() {
                turns.push((context[index].role, tail.to_string()));
            }
            for message in &context[index + 1..] {
                turns.push((message.role, message.content.clone()));
            }
        }
        None => {
            for message in context {
                if message.role != Role::System {
                    turns.push((message.role, message.content.clone()));
                }
            }
        }
    }
    turns
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::scripted::OracleAgent;
    use crate::agents::Agent;
    use crate::env::{EnvState, Mode, TestCase};
    use crate::oracle;
    use crate::prompts::{render_feedback, system_prompt};
    use crate::runner::{build_context, make_ice_episodes, run_episode, RunConfig};
    use crate::testgen;

    fn fresh_context(case: &TestCase) -> Vec<ChatMessage> {
        let (_, obs) = EnvState::reset(case).unwrap();
        let text = render_feedback(case.kind, &obs);
        let mut live = Vec::new();
        if !text.is_empty() {
            live.push(ChatMessage::user(text));
        }
        build_context(&system_prompt(case), &[], &live)
    }

    #[test]
    fn guess_view_recovers_bounds_and_midpoint() {
        let case = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 0, 64).unwrap();
        let view = EpisodeView::from_messages(&fresh_context(&case)).unwrap();
        assert_eq!(view.kind, EnvKind::GuessNum);
        assert_eq!(view.interval, Some((32, 32_800)));
        assert_eq!(view.optimal_action(), Some(16_416));
        assert_eq!(view.steps_taken, 0);
    }

    #[test]
    fn guess_view_tracks_feedback_narrowing() {
        let case = TestCase::guess(EnvKind::Coin, Mode::Easy, 0, 64).unwrap();
        let mut messages = fresh_context(&case);
        messages.push(ChatMessage::assistant("I'll try 16,416 first."));
        messages.push(ChatMessage::user(
            "The witch hints that the actual amount is lower than your guess.",
        ));
        let view = EpisodeView::from_messages(&messages).unwrap();
        assert_eq!(view.interval, Some((32, 16_415)));
        assert_eq!(view.optimal_action(), Some(8_223));
        assert_eq!(view.steps_taken, 1);
        assert!(!view.solved);
    }

    #[test]
    fn view_tracks_every_env_state_in_oracle_play() {
        for (kind, seed) in [
            (EnvKind::Dfs, 11u64),
            (EnvKind::CaveDfs, 12),
            (EnvKind::Bfs, 13),
            (EnvKind::CaveBfs, 14),
        ] {
            let case = testgen::gen_case(kind, Mode::Easy, seed);
            let (mut state, obs) = EnvState::reset(&case).unwrap();
            let system = system_prompt(&case);
            let mut live = vec![ChatMessage::user(render_feedback(kind, &obs))];
            while state.termination().is_none() {
                let context = build_context(&system, &[], &live);
                let view = EpisodeView::from_messages(&context).unwrap();
                assert_eq!(view.current, state.current_node());
                assert_eq!(
                    view.visited.iter().copied().collect::<Vec<_>>(),
                    state.visited().unwrap().iter().copied().collect::<Vec<_>>()
                );
                let expected = oracle::optimal_action(&state);
                assert_eq!(view.optimal_action(), expected, "kind {kind:?} seed {seed}");
                let action = expected.unwrap();
                let outcome = state.step(action).unwrap();
                live.push(ChatMessage::assistant(action.to_string()));
                if let Some(obs) = &outcome.observation {
                    live.push(ChatMessage::user(render_feedback(kind, obs)));
                }
            }
        }
    }

    #[test]
    fn view_ignores_example_episodes() {
        let donors: Vec<TestCase> = (0..3)
            .map(|s| testgen::gen_case(EnvKind::Bfs, Mode::Easy, s))
            .collect();
        let live_case = testgen::gen_case(EnvKind::Bfs, Mode::Easy, 50);
        let examples = make_ice_episodes(&donors, 2, &live_case).unwrap();
        let (_, obs) = EnvState::reset(&live_case).unwrap();
        let live = vec![ChatMessage::user(render_feedback(live_case.kind, &obs))];
        let context = build_context(&system_prompt(&live_case), &examples, &live);
        let view = EpisodeView::from_messages(&context).unwrap();
        // Only the live start node is visited; donor traversals are excluded.
        assert_eq!(view.visited.iter().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(view.steps_taken, 0);
        let (state, _) = EnvState::reset(&live_case).unwrap();
        assert_eq!(view.optimal_action(), oracle::optimal_action(&state));
    }

    #[test]
    fn view_matches_oracle_throughout_ice_episode() {
        let donors: Vec<TestCase> = (0..4)
            .map(|s| testgen::gen_case(EnvKind::CaveBfs, Mode::Easy, s))
            .collect();
        let live = testgen::gen_case(EnvKind::CaveBfs, Mode::Easy, 77);
        let config = RunConfig {
            protocol: crate::runner::Protocol::InContext { examples: 3 },
            ..RunConfig::default()
        };
        let t = run_episode(&OracleAgent, &live, &config, Some(&donors)).unwrap();
        assert_eq!(t.termination, Some(crate::env::Termination::Solved));
        assert!(t.steps.iter().all(|s| s.following));
    }

    #[test]
    fn unreadable_contexts_are_rejected() {
        assert!(EpisodeView::from_messages(&[]).is_err());
        let junk = vec![ChatMessage::system("You like cheese.")];
        assert!(EpisodeView::from_messages(&junk).is_err());
        let case = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 0, 64).unwrap();
        let mut messages = fresh_context(&case);
        messages.push(ChatMessage::assistant("42"));
        messages.push(ChatMessage::user("The moon is cheese."));
        assert!(matches!(
            EpisodeView::from_messages(&messages),
            Err(AgentError::View(_))
        ));
    }

    #[test]
    fn oracle_agent_error_surface_is_view() {
        let junk = vec![ChatMessage::system("unrelated")];
        assert!(matches!(
            OracleAgent.respond(&junk),
            Err(AgentError::View(_))
        ));
    }
}
