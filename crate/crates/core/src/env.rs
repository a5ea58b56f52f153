//! Environment kinds, test-case payloads, and the episodic state machines.
//!
//! An episode starts from a [`TestCase`] via [`EnvState::reset`] and advances one
//! integer action at a time via [`EnvState::step`]. State is opaque to the agent:
//! everything an agent may learn is carried by the returned [`Observation`]s.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid test case: {0}")]
    InvalidCase(String),
    #[error("episode already terminated")]
    AlreadyTerminated,
}

/// Environment family: what the hidden state and the winning condition are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Guess a hidden integer inside a closed interval.
    Guess,
    /// Visit every node of a hidden tree, moving along edges (backtracking allowed).
    Dfs,
    /// Visit every node of a hidden tree, expanding only from the visited set.
    Bfs,
}

/// Surface vocabulary of the prompts and feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Skin {
    Base,
    Embodied,
}

/// The six concrete environments: three families, each with a plain and an
/// embodied skin. The skin changes only the rendered text, never the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    GuessNum,
    Dfs,
    Bfs,
    Coin,
    CaveDfs,
    CaveBfs,
}

impl EnvKind {
    pub const ALL: [EnvKind; 6] = [
        EnvKind::GuessNum,
        EnvKind::Dfs,
        EnvKind::Bfs,
        EnvKind::Coin,
        EnvKind::CaveDfs,
        EnvKind::CaveBfs,
    ];

    pub const BASE: [EnvKind; 3] = [EnvKind::GuessNum, EnvKind::Dfs, EnvKind::Bfs];

    pub fn family(self) -> Family {
        match self {
            EnvKind::GuessNum | EnvKind::Coin => Family::Guess,
            EnvKind::Dfs | EnvKind::CaveDfs => Family::Dfs,
            EnvKind::Bfs | EnvKind::CaveBfs => Family::Bfs,
        }
    }

    pub fn skin(self) -> Skin {
        match self {
            EnvKind::GuessNum | EnvKind::Dfs | EnvKind::Bfs => Skin::Base,
            EnvKind::Coin | EnvKind::CaveDfs | EnvKind::CaveBfs => Skin::Embodied,
        }
    }

    /// The plain-skin twin sharing this kind's dynamics.
    pub fn base(self) -> EnvKind {
        match self.family() {
            Family::Guess => EnvKind::GuessNum,
            Family::Dfs => EnvKind::Dfs,
            Family::Bfs => EnvKind::Bfs,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::GuessNum => "guess_num",
            EnvKind::Dfs => "dfs",
            EnvKind::Bfs => "bfs",
            EnvKind::Coin => "coin",
            EnvKind::CaveDfs => "cave_dfs",
            EnvKind::CaveBfs => "cave_bfs",
        }
    }

    pub fn from_name(s: &str) -> Option<EnvKind> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }

    /// Inclusive guessing bounds for guess-family kinds, `None` otherwise.
    pub fn guess_bounds(self, mode: Mode) -> Option<(i64, i64)> {
        match (self.family(), mode) {
            (Family::Guess, Mode::Easy) => Some((32, 32_800)),
            (Family::Guess, Mode::Hard) => Some((32, 33_000_000)),
            _ => None,
        }
    }

    /// Tree size for traversal-family kinds, `None` otherwise.
    pub fn node_count(self, mode: Mode) -> Option<usize> {
        match (self.family(), mode) {
            (Family::Dfs, Mode::Easy) => Some(8),
            (Family::Dfs, Mode::Hard) => Some(13),
            (Family::Bfs, Mode::Easy) => Some(15),
            (Family::Bfs, Mode::Hard) => Some(25),
            _ => None,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Difficulty: sets bounds/tree size, the step budget, and the canonical set size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Easy,
    Hard,
}

impl Mode {
    pub fn step_budget(self) -> u32 {
        match self {
            Mode::Easy => 20,
            Mode::Hard => 30,
        }
    }

    pub fn canonical_case_count(self) -> usize {
        match self {
            Mode::Easy => 400,
            Mode::Hard => 1500,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Easy => "easy",
            Mode::Hard => "hard",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        match s {
            "easy" => Some(Mode::Easy),
            "hard" => Some(Mode::Hard),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hidden episode content. Trees are stored as a canonical edge list:
/// each edge `(a, b)` with `a < b`, list sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CasePayload {
    Guess {
        low: i64,
        high: i64,
        target: i64,
    },
    Tree {
        node_count: usize,
        edges: Vec<(usize, usize)>,
        start: usize,
    },
}

/// One evaluation instance: which environment, which difficulty, which hidden
/// content, plus the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub kind: EnvKind,
    pub mode: Mode,
    pub seed: u64,
    #[serde(flatten)]
    pub payload: CasePayload,
}

impl TestCase {
    /// Guess-family case with the canonical bounds for `mode`.
    pub fn guess(kind: EnvKind, mode: Mode, seed: u64, target: i64) -> Result<TestCase, EnvError> {
        let (low, high) = kind
            .guess_bounds(mode)
            .ok_or_else(|| EnvError::InvalidCase(format!("{kind} is not a guessing kind")))?;
        let case = TestCase {
            kind,
            mode,
            seed,
            payload: CasePayload::Guess { low, high, target },
        };
        case.validate()?;
        Ok(case)
    }

    /// Tree-family case; edges are canonicalized ((min, max), sorted) before
    /// validation, so any orientation/order is accepted here.
    pub fn tree(
        kind: EnvKind,
        mode: Mode,
        seed: u64,
        edges: Vec<(usize, usize)>,
    ) -> Result<TestCase, EnvError> {
        let node_count = kind
            .node_count(mode)
            .ok_or_else(|| EnvError::InvalidCase(format!("{kind} is not a traversal kind")))?;
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        let case = TestCase {
            kind,
            mode,
            seed,
            payload: CasePayload::Tree {
                node_count,
                edges,
                start: 0,
            },
        };
        case.validate()?;
        Ok(case)
    }

    /// Case identity ignoring the per-case seed; used for deduplication and for
    /// checking that in-context donors differ from the live case.
    pub fn content_key(&self) -> String {
        serde_json::to_string(&(&self.kind, &self.mode, &self.payload))
            .expect("case payload serializes")
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let fail = |msg: String| Err(EnvError::InvalidCase(msg));
        match (&self.payload, self.kind.family()) {
            (CasePayload::Guess { low, high, target }, Family::Guess) => {
                let (lo, hi) = self.kind.guess_bounds(self.mode).unwrap();
                if (*low, *high) != (lo, hi) {
                    return fail(format!(
                        "bounds ({low}, {high}) do not match {} {} bounds ({lo}, {hi})",
                        self.kind, self.mode
                    ));
                }
                if target < low || target > high {
                    return fail(format!("target {target} outside [{low}, {high}]"));
                }
                Ok(())
            }
            (
                CasePayload::Tree {
                    node_count,
                    edges,
                    start,
                },
                Family::Dfs | Family::Bfs,
            ) => {
                let expected = self.kind.node_count(self.mode).unwrap();
                if *node_count != expected {
                    return fail(format!(
                        "node_count {node_count} does not match {} {} size {expected}",
                        self.kind, self.mode
                    ));
                }
                if *start != 0 {
                    return fail(format!("start node must be 0, got {start}"));
                }
                if edges.len() != node_count - 1 {
                    return fail(format!(
                        "tree on {node_count} nodes needs {} edges, got {}",
                        node_count - 1,
                        edges.len()
                    ));
                }
                let mut prev: Option<(usize, usize)> = None;
                for &(a, b) in edges {
                    if a >= b {
                        return fail(format!("edge ({a}, {b}) not in canonical (min, max) form"));
                    }
                    if b >= *node_count {
                        return fail(format!("edge ({a}, {b}) references node >= {node_count}"));
                    }
                    if prev == Some((a, b)) {
                        return fail(format!("duplicate edge ({a}, {b})"));
                    }
                    if let Some(p) = prev {
                        if p > (a, b) {
                            return fail("edge list not sorted".to_string());
                        }
                    }
                    prev = Some((a, b));
                }
                // Connectivity: |E| = |V| - 1 plus connected => tree.
                let adjacency = build_adjacency(*node_count, edges);
                let mut seen = vec![false; *node_count];
                let mut stack = vec![0usize];
                seen[0] = true;
                let mut count = 1;
                while let Some(n) = stack.pop() {
                    for &m in &adjacency[n] {
                        if !seen[m] {
                            seen[m] = true;
                            count += 1;
                            stack.push(m);
                        }
                    }
                }
                if count != *node_count {
                    return fail("edge list is not connected".to_string());
                }
                Ok(())
            }
            _ => fail(format!("payload does not match family of {}", self.kind)),
        }
    }
}

fn build_adjacency(node_count: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); node_count];
    for &(a, b) in edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    adjacency
}

/// Ternary feedback for a guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    TargetBigger,
    TargetLower,
    Correct,
}

/// Everything the environment reveals after a reset or a valid step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Observation {
    /// Guess-family reset: nothing is revealed until the first guess.
    Empty,
    Comparison { comparison: Comparison },
    /// Traversal feedback: the node just reached and its sorted neighbors.
    Node { id: usize, adjacent: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Solved,
    BudgetExhausted,
    InvalidResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub validity: Validity,
    /// `None` exactly when the action was invalid.
    pub observation: Option<Observation>,
    /// Set on the step that ends the episode.
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq)]
enum Inner {
    Guess {
        /// Feedback-implied interval; starts at the case bounds and only shrinks.
        lo: i64,
        hi: i64,
    },
    Tree {
        adjacency: Vec<Vec<usize>>,
        visited: BTreeSet<usize>,
        current: usize,
        /// `entry_parent[n]` = node from which `n` was first entered.
        entry_parent: Vec<Option<usize>>,
        /// Visited-set size after each step taken (unchanged on invalid steps).
        timeline: Vec<usize>,
    },
}

/// Live episode state. Construct with [`EnvState::reset`], advance with
/// [`EnvState::step`]; once `termination` is set further steps are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    case: TestCase,
    budget: u32,
    step_index: u32,
    termination: Option<Termination>,
    inner: Inner,
}

impl EnvState {
    pub fn reset(case: &TestCase) -> Result<(EnvState, Observation), EnvError> {
        Self::reset_with_budget(case, case.mode.step_budget())
    }

    pub fn reset_with_budget(
        case: &TestCase,
        budget: u32,
    ) -> Result<(EnvState, Observation), EnvError> {
        case.validate()?;
        if budget == 0 {
            return Err(EnvError::InvalidCase("step budget must be positive".into()));
        }
        let (inner, observation) = match &case.payload {
            CasePayload::Guess { low, high, .. } => {
                (Inner::Guess { lo: *low, hi: *high }, Observation::Empty)
            }
            CasePayload::Tree {
                node_count,
                edges,
                start,
            } => {
                let adjacency = build_adjacency(*node_count, edges);
                let mut entry_parent = vec![None; *node_count];
                entry_parent[*start] = None;
                let observation = Observation::Node {
                    id: *start,
                    adjacent: adjacency[*start].clone(),
                };
                (
                    Inner::Tree {
                        adjacency,
                        visited: BTreeSet::from([*start]),
                        current: *start,
                        entry_parent,
                        timeline: Vec::new(),
                    },
                    observation,
                )
            }
        };
        Ok((
            EnvState {
                case: case.clone(),
                budget,
                step_index: 0,
                termination: None,
                inner,
            },
            observation,
        ))
    }

    /// Apply one action. Errors only if the episode has already terminated;
    /// an illegal action is not an error but an `Invalid` outcome that ends
    /// the episode with [`Termination::InvalidResponse`].
    pub fn step(&mut self, action: i64) -> Result<StepOutcome, EnvError> {
        if self.termination.is_some() {
            return Err(EnvError::AlreadyTerminated);
        }
        self.step_index += 1;
        let (validity, observation, solved) = match &mut self.inner {
            Inner::Guess { lo, hi } => {
                let CasePayload::Guess { low, high, target } = &self.case.payload else {
                    unreachable!("guess state implies guess payload");
                };
                if action < *low || action > *high {
                    (Validity::Invalid, None, false)
                } else {
                    let comparison = if action < *target {
                        Comparison::TargetBigger
                    } else if action > *target {
                        Comparison::TargetLower
                    } else {
                        Comparison::Correct
                    };
                    match comparison {
                        Comparison::TargetBigger => *lo = (*lo).max(action + 1),
                        Comparison::TargetLower => *hi = (*hi).min(action - 1),
                        Comparison::Correct => {
                            *lo = action;
                            *hi = action;
                        }
                    }
                    (
                        Validity::Valid,
                        Some(Observation::Comparison { comparison }),
                        comparison == Comparison::Correct,
                    )
                }
            }
            Inner::Tree {
                adjacency,
                visited,
                current,
                entry_parent,
                timeline,
            } => {
                let node_count = adjacency.len();
                let node = usize::try_from(action).ok().filter(|n| *n < node_count);
                let valid = match (self.case.kind.family(), node) {
                    (Family::Dfs, Some(n)) => adjacency[*current].contains(&n),
                    (Family::Bfs, Some(n)) => {
                        !visited.contains(&n) && adjacency[n].iter().any(|m| visited.contains(m))
                    }
                    _ => false,
                };
                let result = if valid {
                    let n = node.unwrap();
                    if visited.insert(n) {
                        entry_parent[n] = Some(*current);
                    }
                    *current = n;
                    let observation = Observation::Node {
                        id: n,
                        adjacent: adjacency[n].clone(),
                    };
                    (
                        Validity::Valid,
                        Some(observation),
                        visited.len() == node_count,
                    )
                } else {
                    (Validity::Invalid, None, false)
                };
                timeline.push(visited.len());
                result
            }
        };
        let termination = if validity == Validity::Invalid {
            Some(Termination::InvalidResponse)
        } else if solved {
            Some(Termination::Solved)
        } else if self.step_index >= self.budget {
            Some(Termination::BudgetExhausted)
        } else {
            None
        };
        self.termination = termination;
        Ok(StepOutcome {
            validity,
            observation,
            termination,
        })
    }

    pub fn case(&self) -> &TestCase {
        &self.case
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn step_index(&self) -> u32 {
        self.step_index
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    /// Live feedback-implied interval (guess family).
    pub fn guess_interval(&self) -> Option<(i64, i64)> {
        match &self.inner {
            Inner::Guess { lo, hi } => Some((*lo, *hi)),
            _ => None,
        }
    }

    pub fn visited(&self) -> Option<&BTreeSet<usize>> {
        match &self.inner {
            Inner::Tree { visited, .. } => Some(visited),
            _ => None,
        }
    }

    pub fn current_node(&self) -> Option<usize> {
        match &self.inner {
            Inner::Tree { current, .. } => Some(*current),
            _ => None,
        }
    }

    pub fn entry_parent(&self, node: usize) -> Option<usize> {
        match &self.inner {
            Inner::Tree { entry_parent, .. } => entry_parent.get(node).copied().flatten(),
            _ => None,
        }
    }

    pub fn adjacency(&self) -> Option<&[Vec<usize>]> {
        match &self.inner {
            Inner::Tree { adjacency, .. } => Some(adjacency),
            _ => None,
        }
    }

    pub fn neighbors(&self, node: usize) -> Option<&[usize]> {
        self.adjacency()
            .and_then(|adj| adj.get(node).map(|v| v.as_slice()))
    }

    /// Visited-set size after each step taken so far (tree families).
    pub fn coverage_timeline(&self) -> Option<&[usize]> {
        match &self.inner {
            Inner::Tree { timeline, .. } => Some(timeline),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star_dfs_case() -> TestCase {
        TestCase::tree(
            EnvKind::Dfs,
            Mode::Easy,
            1,
            (1..8).map(|n| (0, n)).collect(),
        )
        .unwrap()
    }

    fn path_bfs_case() -> TestCase {
        TestCase::tree(
            EnvKind::Bfs,
            Mode::Easy,
            2,
            (0..14).map(|n| (n, n + 1)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in EnvKind::ALL {
            assert_eq!(EnvKind::from_name(kind.name()), Some(kind));
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
    }

    #[test]
    fn canonical_parameters() {
        assert_eq!(EnvKind::GuessNum.guess_bounds(Mode::Easy), Some((32, 32_800)));
        assert_eq!(
            EnvKind::Coin.guess_bounds(Mode::Hard),
            Some((32, 33_000_000))
        );
        assert_eq!(EnvKind::Dfs.node_count(Mode::Easy), Some(8));
        assert_eq!(EnvKind::CaveDfs.node_count(Mode::Hard), Some(13));
        assert_eq!(EnvKind::Bfs.node_count(Mode::Easy), Some(15));
        assert_eq!(EnvKind::CaveBfs.node_count(Mode::Hard), Some(25));
        assert_eq!(Mode::Easy.step_budget(), 20);
        assert_eq!(Mode::Hard.step_budget(), 30);
        assert_eq!(Mode::Easy.canonical_case_count(), 400);
        assert_eq!(Mode::Hard.canonical_case_count(), 1500);
    }

    #[test]
    fn guess_case_validation() {
        let case = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 0, 64).unwrap();
        assert!(case.validate().is_ok());
        assert!(TestCase::guess(EnvKind::GuessNum, Mode::Easy, 0, 31).is_err());
        assert!(TestCase::guess(EnvKind::GuessNum, Mode::Easy, 0, 32_801).is_err());
        assert!(TestCase::guess(EnvKind::Dfs, Mode::Easy, 0, 64).is_err());

        let tampered = TestCase {
            payload: CasePayload::Guess {
                low: 1,
                high: 32_800,
                target: 64,
            },
            ..case
        };
        assert!(tampered.validate().is_err());
    }

    #[test]
    fn tree_case_validation() {
        // Canonicalization: reversed and unsorted edges are accepted by the constructor.
        let case = TestCase::tree(
            EnvKind::Dfs,
            Mode::Easy,
            0,
            vec![(7, 0), (1, 0), (2, 1), (3, 1), (4, 2), (5, 2), (6, 5)],
        )
        .unwrap();
        let CasePayload::Tree { edges, .. } = &case.payload else {
            panic!()
        };
        assert_eq!(
            edges,
            &[(0, 1), (0, 7), (1, 2), (1, 3), (2, 4), (2, 5), (5, 6)]
        );

        // Wrong edge count.
        assert!(TestCase::tree(EnvKind::Dfs, Mode::Easy, 0, vec![(0, 1)]).is_err());
        // Duplicate edge (cycle implied by repeat + disconnect elsewhere).
        assert!(TestCase::tree(
            EnvKind::Dfs,
            Mode::Easy,
            0,
            vec![(0, 1), (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6)],
        )
        .is_err());
        // Self loop.
        assert!(TestCase::tree(
            EnvKind::Dfs,
            Mode::Easy,
            0,
            vec![(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6)],
        )
        .is_err());
        // Node id out of range.
        assert!(TestCase::tree(
            EnvKind::Dfs,
            Mode::Easy,
            0,
            vec![(0, 8), (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6)],
        )
        .is_err());
        // Disconnected: right edge count (14) and all edges distinct, but two components.
        assert!(TestCase::tree(
            EnvKind::Bfs,
            Mode::Easy,
            0,
            vec![
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 4),
                (4, 5),
                (5, 6),
                (7, 8),
                (8, 9),
                (9, 10),
                (10, 11),
                (11, 12),
                (12, 13),
                (13, 14),
                (7, 14),
            ],
        )
        .is_err());
    }

    #[test]
    fn content_key_ignores_seed() {
        let a = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 1, 64).unwrap();
        let b = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 2, 64).unwrap();
        let c = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 1, 65).unwrap();
        assert_eq!(a.content_key(), b.content_key());
        assert_ne!(a.content_key(), c.content_key());
    }

    #[test]
    fn guess_episode_flow() {
        let case = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 0, 64).unwrap();
        let (mut env, obs) = EnvState::reset(&case).unwrap();
        assert_eq!(obs, Observation::Empty);
        assert_eq!(env.guess_interval(), Some((32, 32_800)));

        let out = env.step(16_416).unwrap();
        assert_eq!(out.validity, Validity::Valid);
        assert_eq!(
            out.observation,
            Some(Observation::Comparison {
                comparison: Comparison::TargetLower
            })
        );
        assert_eq!(out.termination, None);
        assert_eq!(env.guess_interval(), Some((32, 16_415)));

        // Non-midpoint guesses still shrink the implied interval (clamped).
        let out = env.step(40).unwrap();
        assert_eq!(
            out.observation,
            Some(Observation::Comparison {
                comparison: Comparison::TargetBigger
            })
        );
        assert_eq!(env.guess_interval(), Some((41, 16_415)));

        let out = env.step(64).unwrap();
        assert_eq!(
            out.observation,
            Some(Observation::Comparison {
                comparison: Comparison::Correct
            })
        );
        assert_eq!(out.termination, Some(Termination::Solved));
        assert_eq!(env.guess_interval(), Some((64, 64)));
        assert!(matches!(env.step(64), Err(EnvError::AlreadyTerminated)));
    }

    #[test]
    fn guess_out_of_bounds_is_invalid_not_clamped() {
        let case = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 0, 64).unwrap();
        let (mut env, _) = EnvState::reset(&case).unwrap();
        let out = env.step(31).unwrap();
        assert_eq!(out.validity, Validity::Invalid);
        assert_eq!(out.observation, None);
        assert_eq!(out.termination, Some(Termination::InvalidResponse));
    }

    #[test]
    fn guess_budget_exhaustion() {
        let case = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 0, 64).unwrap();
        let (mut env, _) = EnvState::reset_with_budget(&case, 2).unwrap();
        assert_eq!(env.step(100).unwrap().termination, None);
        let out = env.step(101).unwrap();
        assert_eq!(out.termination, Some(Termination::BudgetExhausted));
        assert_eq!(out.validity, Validity::Valid);
    }

    #[test]
    fn dfs_moves_and_backtracking() {
        let case = star_dfs_case();
        let (mut env, obs) = EnvState::reset(&case).unwrap();
        assert_eq!(
            obs,
            Observation::Node {
                id: 0,
                adjacent: vec![1, 2, 3, 4, 5, 6, 7]
            }
        );
        let out = env.step(1).unwrap();
        assert_eq!(out.validity, Validity::Valid);
        assert_eq!(
            out.observation,
            Some(Observation::Node {
                id: 1,
                adjacent: vec![0]
            })
        );
        // Backtracking (revisiting node 0) is a valid DFS move.
        let out = env.step(0).unwrap();
        assert_eq!(out.validity, Validity::Valid);
        assert_eq!(env.visited().unwrap().len(), 2);
        assert_eq!(env.entry_parent(1), Some(0));
        assert_eq!(env.entry_parent(0), None);
        // Non-adjacent move from 0's neighbor set is fine, but from node 1 only 0 is adjacent.
        env.step(1).unwrap();
        let out = env.step(2).unwrap();
        assert_eq!(out.validity, Validity::Invalid);
        assert_eq!(out.termination, Some(Termination::InvalidResponse));
        assert_eq!(env.coverage_timeline(), Some(&[2, 2, 2, 2][..]));
    }

    #[test]
    fn dfs_solved_on_last_node() {
        let case = star_dfs_case();
        let (mut env, _) = EnvState::reset(&case).unwrap();
        for n in 1..7 {
            assert_eq!(env.step(n).unwrap().termination, None);
            assert_eq!(env.step(0).unwrap().termination, None);
        }
        let out = env.step(7).unwrap();
        assert_eq!(out.termination, Some(Termination::Solved));
        assert_eq!(env.visited().unwrap().len(), 8);
    }

    #[test]
    fn bfs_validity_rules() {
        let case = path_bfs_case();
        let (mut env, obs) = EnvState::reset(&case).unwrap();
        assert_eq!(
            obs,
            Observation::Node {
                id: 0,
                adjacent: vec![1]
            }
        );
        // Not adjacent to the visited set yet.
        let mut probe = env.clone();
        assert_eq!(probe.step(2).unwrap().validity, Validity::Invalid);

        assert_eq!(env.step(1).unwrap().validity, Validity::Valid);
        // Revisiting a visited node is invalid under BFS rules and terminates.
        let mut probe = env.clone();
        let out = probe.step(0).unwrap();
        assert_eq!(out.validity, Validity::Invalid);
        assert_eq!(out.termination, Some(Termination::InvalidResponse));

        assert_eq!(env.step(2).unwrap().validity, Validity::Valid);
        assert_eq!(env.visited().unwrap().len(), 3);
        assert_eq!(env.coverage_timeline(), Some(&[2, 3][..]));
    }

    #[test]
    fn bfs_solves_path_in_node_count_minus_one_steps() {
        let case = path_bfs_case();
        let (mut env, _) = EnvState::reset(&case).unwrap();
        for n in 1..14 {
            assert_eq!(env.step(n).unwrap().termination, None);
        }
        let out = env.step(14).unwrap();
        assert_eq!(out.termination, Some(Termination::Solved));
        assert_eq!(env.step_index(), 14);
    }

    #[test]
    fn negative_and_huge_actions_are_invalid_on_trees() {
        let case = star_dfs_case();
        let (mut env, _) = EnvState::reset(&case).unwrap();
        assert_eq!(env.step(-1).unwrap().validity, Validity::Invalid);
        let (mut env, _) = EnvState::reset(&case).unwrap();
        assert_eq!(env.step(1 << 40).unwrap().validity, Validity::Invalid);
    }

    #[test]
    fn case_serialization_round_trip() {
        let guess = TestCase::guess(EnvKind::Coin, Mode::Hard, 7, 1_000_000).unwrap();
        let json = serde_json::to_string(&guess).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"coin","mode":"hard","seed":7,"low":32,"high":33000000,"target":1000000}"#
        );
        assert_eq!(serde_json::from_str::<TestCase>(&json).unwrap(), guess);

        let tree = star_dfs_case();
        let json = serde_json::to_string(&tree).unwrap();
        let back: TestCase = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree);
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }
}
