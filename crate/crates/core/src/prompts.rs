//! Frozen text surface of the environments: system prompts, feedback lines, and
//! the inverse parsers that recover structured observations from feedback text.
//!
//! These strings are part of the harness contract — golden tests pin them byte
//! for byte. Scripted agents rely on `parse_feedback`/`detect_kind` to rebuild
//! episode state from the conversation alone, so renderers and parsers must
//! stay exact inverses.

use std::sync::OnceLock;

use regex::Regex;

use crate::env::{CasePayload, Comparison, EnvKind, Family, Observation, Skin, TestCase};

/// System prompt for the plain number-guessing environment.
/// `{min}`/`{max}` are replaced with the case bounds.
pub const GUESS_NUM_TEMPLATE: &str = "You are required to guess the random number which I have just picked between {min} and {max}. I will only tell you whether the true number is bigger or lower than your guess. Adjust your guess according to my response. Try as few times as you can. You can only reply with an integer number between {min} and {max}.";

/// System prompt for the embodied number-guessing environment.
pub const COIN_TEMPLATE: &str = "You are in a hidden temple where an old witch sits with a chest of gold. The witch promises to reward you with gold coins, the amount hidden within the chest ranging from {min} and {max}. To claim your prize, you must correctly guess the exact number of gold coins in the chest. After each guess, the witch will hint if the actual amount is higher or lower than your guess. Use these clues to adjust your guess accordingly. Try as few times as you can. You can only reply with an integer number between {min} and {max}.";

/// System prompt for the plain DFS traversal environment.
pub const DFS_TEMPLATE: &str = "You are required to visit all the nodes in an undirected non-cyclic graph. An undirected non-cyclic graph contains a set of nodes and a set of edges that each connect a pair of nodes. All edges are undirected so that you can move from one node to the other connected by the edge in either direction. Every time you visit a node, you will be given the adjacent nodes connected to this node. You can only reply with an integer number indicating which node to be visited next. Do not explain your answer. Try to traverse the entire graph in as few rounds as possible. You are currently on the node 0. You should use depth-first-search algorithm, each time you should select a node you have not moved to. If all nodes adjacent to the current node have been visited, you should backtrack to the node through which you entered this node for the first time.";

/// System prompt for the plain BFS traversal environment.
pub const BFS_TEMPLATE: &str = "You are required to visit all the nodes in an undirected non-cyclic graph. An undirected non-cyclic graph contains a set of nodes, and a set of edges that each connects a pair of nodes. Every time you visit a node, you will be given the adjacent nodes connected to this node. You can only visit nodes that are adjacent to the already visited nodes. You can only reply with an integer number indicating which node to be visited next. Do not explain your answer. Try to traverse the entire graph in as few rounds as possible. You are currently on the node 0. You should use breadth-first-search algorithm. The algorithm works as follows:\n1. Initialize a queue data structure and add the starting node to the queue.\n2. While the queue is not empty, visit the first node and remove it from the queue.\n3. For nodes adjacent to the removed vertex, add the unvisited ones to the queue.\n4. Repeat steps 2-3 until the queue is empty.";

/// System prompt for the embodied DFS environment. Deliberately names no
/// algorithm: the agent must infer the exploration strategy.
pub const CAVE_DFS_TEMPLATE: &str = "There is an expansive underground cave system in which each cave is uniquely numbered and interconnected by tunnels. Every time you visit a cave, you will know the adjacent caves directly connected to this one. You can only reply with an integer number indicating which cave to be visited next. Do not explain your answer. Your objective is to explore every cave, starting from cave 0. Try to visit all the caves in as few rounds as possible. You are currently in the cave 0.";

/// System prompt for the embodied BFS environment. Names no algorithm; the
/// splitting-teams fiction implies the frontier rule.
pub const CAVE_BFS_TEMPLATE: &str = "There is an expansive underground cave system in which each cave is uniquely numbered and interconnected by tunnels. Every time you and your team visit a cave, you will know the adjacent caves directly connected to this one. Your team will then split into smaller groups to explore different caves, but groups can only move to caves adjacent to the visited cave. You can only reply with an integer number indicating which cave to be visited next. Do not explain your answer. Your objective is to explore every cave, starting from cave 0. Try to visit all the caves in as few rounds as possible. You and your team are currently in the cave 0.";

pub const GUESS_BIGGER: &str = "The true number is bigger than your guess.";
pub const GUESS_LOWER: &str = "The true number is lower than your guess.";
pub const COIN_BIGGER: &str = "The witch hints that the actual amount is higher than your guess.";
pub const COIN_LOWER: &str = "The witch hints that the actual amount is lower than your guess.";
pub const CORRECT: &str = "Correct!";

/// User-role marker placed before each in-context example episode.
pub const EXAMPLE_BOUNDARY: &str = "[Example interaction]";
/// User-role marker placed before the live episode whenever examples precede it.
pub const LIVE_BOUNDARY: &str = "[Your turn]";

pub fn template(kind: EnvKind) -> &'static str {
    match kind {
        EnvKind::GuessNum => GUESS_NUM_TEMPLATE,
        EnvKind::Coin => COIN_TEMPLATE,
        EnvKind::Dfs => DFS_TEMPLATE,
        EnvKind::Bfs => BFS_TEMPLATE,
        EnvKind::CaveDfs => CAVE_DFS_TEMPLATE,
        EnvKind::CaveBfs => CAVE_BFS_TEMPLATE,
    }
}

/// Render the system prompt for a case. Byte-stable for a given case.
pub fn system_prompt(case: &TestCase) -> String {
    match &case.payload {
        CasePayload::Guess { low, high, .. } => template(case.kind)
            .replace("{min}", &low.to_string())
            .replace("{max}", &high.to_string()),
        CasePayload::Tree { .. } => template(case.kind).to_string(),
    }
}

fn node_word(kind: EnvKind) -> (&'static str, &'static str) {
    match kind.skin() {
        Skin::Base => ("node", "nodes"),
        Skin::Embodied => ("cave", "caves"),
    }
}

/// Render observation feedback as the user-visible environment turn.
/// The empty observation (guess-family reset) renders as an empty string.
pub fn render_feedback(kind: EnvKind, observation: &Observation) -> String {
    match observation {
        Observation::Empty => String::new(),
        Observation::Comparison { comparison } => match (kind.skin(), comparison) {
            (_, Comparison::Correct) => CORRECT.to_string(),
            (Skin::Base, Comparison::TargetBigger) => GUESS_BIGGER.to_string(),
            (Skin::Base, Comparison::TargetLower) => GUESS_LOWER.to_string(),
            (Skin::Embodied, Comparison::TargetBigger) => COIN_BIGGER.to_string(),
            (Skin::Embodied, Comparison::TargetLower) => COIN_LOWER.to_string(),
        },
        Observation::Node { id, adjacent } => {
            let (singular, plural) = node_word(kind);
            let list = adjacent
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(", ");
            format!("You are now in {singular} {id}. Adjacent {plural}: {list}.")
        }
    }
}

fn node_feedback_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^You are now in (?:node|cave) (\d+)\. Adjacent (?:nodes|caves): ([0-9, ]+)\.$")
            .expect("static regex compiles")
    })
}

/// Recover a structured observation from rendered feedback text. Inverse of
/// [`render_feedback`] for the matching kind; returns `None` on foreign text.
pub fn parse_feedback(kind: EnvKind, text: &str) -> Option<Observation> {
    let text = text.trim();
    if text.is_empty() {
        return Some(Observation::Empty);
    }
    if text == CORRECT {
        return Some(Observation::Comparison {
            comparison: Comparison::Correct,
        });
    }
    match kind.family() {
        Family::Guess => {
            let (bigger, lower) = match kind.skin() {
                Skin::Base => (GUESS_BIGGER, GUESS_LOWER),
                Skin::Embodied => (COIN_BIGGER, COIN_LOWER),
            };
            if text == bigger {
                Some(Observation::Comparison {
                    comparison: Comparison::TargetBigger,
                })
            } else if text == lower {
                Some(Observation::Comparison {
                    comparison: Comparison::TargetLower,
                })
            } else {
                None
            }
        }
        Family::Dfs | Family::Bfs => {
            let caps = node_feedback_regex().captures(text)?;
            let id: usize = caps[1].parse().ok()?;
            let adjacent: Option<Vec<usize>> = caps[2]
                .split(", ")
                .map(|part| part.parse::<usize>().ok())
                .collect();
            Some(Observation::Node {
                id,
                adjacent: adjacent?,
            })
        }
    }
}

/// Identify which environment a rendered system prompt belongs to.
/// Used by scripted agents, which see only the conversation text.
pub fn detect_kind(system_prompt: &str) -> Option<EnvKind> {
    if system_prompt.contains("old witch") {
        Some(EnvKind::Coin)
    } else if system_prompt.contains("guess the random number") {
        Some(EnvKind::GuessNum)
    } else if system_prompt.contains("cave system") {
        if system_prompt.contains("your team") {
            Some(EnvKind::CaveBfs)
        } else {
            Some(EnvKind::CaveDfs)
        }
    } else if system_prompt.contains("breadth-first-search") {
        Some(EnvKind::Bfs)
    } else if system_prompt.contains("depth-first-search") {
        Some(EnvKind::Dfs)
    } else {
        None
    }
}

/// Extract the `{min}`/`{max}` bounds back out of a rendered guess-family prompt.
pub fn prompt_bounds(kind: EnvKind, system_prompt: &str) -> Option<(i64, i64)> {
    if kind.family() != Family::Guess {
        return None;
    }
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?:between|ranging from) (-?\d+) and (-?\d+)").expect("static regex compiles")
    });
    let caps = re.captures(system_prompt)?;
    Some((caps[1].parse().ok()?, caps[2].parse().ok()?))
}
