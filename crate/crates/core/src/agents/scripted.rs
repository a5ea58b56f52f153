//! Deterministic scripted agents. Each reply is a pure function of the
//! agent's parameters and the rendered context: randomized agents reseed from
//! a hash of the conversation each turn, so reruns and replays coincide
//! without shared mutable state.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use sha2::{Digest, Sha256};

use crate::agents::view::EpisodeView;
use crate::agents::{Agent, AgentError};
use crate::chat::{render_for_digest, ChatMessage};
use crate::env::Family;
use crate::oracle::optimal_guess;
use crate::testgen::draw_below;

fn rng_for(seed: u64, context: &[ChatMessage]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(render_for_digest(context).as_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(word))
}

fn no_moves() -> AgentError {
    AgentError::View("no legal action available in this state".into())
}

/// Plays the prescribed algorithm perfectly: midpoint guesses, smallest-id
/// depth-first/breadth-first moves.
pub struct OracleAgent;

impl Agent for OracleAgent {
    fn label(&self) -> String {
        "oracle".into()
    }

    fn respond(&self, context: &[ChatMessage]) -> Result<String, AgentError> {
        let view = EpisodeView::from_messages(context)?;
        let action = view.optimal_action().ok_or_else(no_moves)?;
        Ok(action.to_string())
    }
}

/// Plays a uniformly random legal action each turn.
pub struct RandomAgent {
    seed: u64,
}

impl RandomAgent {
    pub fn new(seed: u64) -> RandomAgent {
        RandomAgent { seed }
    }
}

impl Agent for RandomAgent {
    fn label(&self) -> String {
        format!("random:{}", self.seed)
    }

    fn respond(&self, context: &[ChatMessage]) -> Result<String, AgentError> {
        let view = EpisodeView::from_messages(context)?;
        let mut rng = rng_for(self.seed, context);
        let action = match view.kind.family() {
            Family::Guess => {
                let (lo, hi) = view.interval.ok_or_else(no_moves)?;
                if lo > hi {
                    return Err(no_moves());
                }
                lo + draw_below(&mut rng, (hi - lo + 1) as u64) as i64
            }
            Family::Dfs | Family::Bfs => {
                let actions = view.valid_tree_actions();
                if actions.is_empty() {
                    return Err(no_moves());
                }
                actions[draw_below(&mut rng, actions.len() as u64) as usize]
            }
        };
        Ok(action.to_string())
    }
}

/// Follows the prescribed algorithm with probability `p_follow`; otherwise
/// plays a uniformly random legal-but-not-following action. When every legal
/// action is a following one (singleton intervals, leaves, one-level
/// frontiers) it follows regardless.
pub struct NoisyAgent {
    seed: u64,
    p_follow: f64,
}

impl NoisyAgent {
    pub fn new(seed: u64, p_follow: f64) -> Result<NoisyAgent, AgentError> {
        if !(0.0..=1.0).contains(&p_follow) {
            return Err(AgentError::Config(format!(
                "p_follow must lie in [0, 1], got {p_follow}"
            )));
        }
        Ok(NoisyAgent { seed, p_follow })
    }
}

impl Agent for NoisyAgent {
    fn label(&self) -> String {
        format!("noisy:{}:{}", self.seed, self.p_follow)
    }

    fn respond(&self, context: &[ChatMessage]) -> Result<String, AgentError> {
        let view = EpisodeView::from_messages(context)?;
        let mut rng = rng_for(self.seed, context);
        const UNIT: u64 = 1 << 53;
        let follow = (draw_below(&mut rng, UNIT) as f64) / (UNIT as f64) < self.p_follow;
        let action = match view.kind.family() {
            Family::Guess => {
                let (lo, hi) = view.interval.ok_or_else(no_moves)?;
                if lo > hi {
                    return Err(no_moves());
                }
                let mid = optimal_guess(lo, hi);
                if follow || lo == hi {
                    // Singleton intervals leave the midpoint as the only move.
                    mid
                } else {
                    let value = lo + draw_below(&mut rng, (hi - lo) as u64) as i64;
                    if value >= mid {
                        value + 1
                    } else {
                        value
                    }
                }
            }
            Family::Dfs | Family::Bfs => {
                let following = view.following_actions();
                let valid = view.valid_tree_actions();
                // Prefer the requested pool; a wayward walk can reach states
                // the prescribed algorithm never would (e.g. back at the
                // start with every neighbor visited), where the following
                // pool is empty — any legal move has to do, and vice versa
                // at leaves and one-level frontiers where every legal move
                // follows.
                let pool: Vec<i64> = if follow {
                    if following.is_empty() {
                        valid
                    } else {
                        following
                    }
                } else {
                    let defiant: Vec<i64> = valid
                        .iter()
                        .copied()
                        .filter(|a| !following.contains(a))
                        .collect();
                    if defiant.is_empty() {
                        if following.is_empty() {
                            valid
                        } else {
                            following
                        }
                    } else {
                        defiant
                    }
                };
                if pool.is_empty() {
                    return Err(no_moves());
                }
                pool[draw_below(&mut rng, pool.len() as u64) as usize]
            }
        };
        Ok(action.to_string())
    }
}

/// Plays optimally for `steps` turns, then emits one deliberately illegal
/// action (an out-of-range guess, a non-adjacent node, a revisit).
pub struct InvalidAfterAgent {
    steps: u32,
}

impl InvalidAfterAgent {
    pub fn new(steps: u32) -> InvalidAfterAgent {
        InvalidAfterAgent { steps }
    }
}

impl Agent for InvalidAfterAgent {
    fn label(&self) -> String {
        format!("invalid-after:{}", self.steps)
    }

    fn respond(&self, context: &[ChatMessage]) -> Result<String, AgentError> {
        let view = EpisodeView::from_messages(context)?;
        if (view.steps_taken as u32) < self.steps {
            let action = view.optimal_action().ok_or_else(no_moves)?;
            return Ok(action.to_string());
        }
        let action = match view.kind.family() {
            Family::Guess => {
                let (_, high) = view.prompt_bounds.ok_or_else(no_moves)?;
                high + 1
            }
            // Trees have no self-loops, so the current node is never
            // adjacent to itself; for breadth-first search it is also a
            // revisit. Illegal either way.
            Family::Dfs | Family::Bfs => view.current.ok_or_else(no_moves)? as i64,
        };
        Ok(action.to_string())
    }
}

/// Replies with an empty string every turn, forcing a parse failure.
pub struct SilentAgent;

impl Agent for SilentAgent {
    fn label(&self) -> String {
        "silent".into()
    }

    fn respond(&self, _context: &[ChatMessage]) -> Result<String, AgentError> {
        Ok(String::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvKind, Mode, Termination, TestCase, Validity};
    use crate::metrics::FollowRow;
    use crate::runner::{run_episode, score_transcript, RunConfig};
    use crate::testgen;

    fn star_dfs_case() -> TestCase {
        let edges: Vec<(usize, usize)> = (1..8).map(|i| (0, i)).collect();
        TestCase::tree(EnvKind::Dfs, Mode::Easy, 0, edges).unwrap()
    }

    #[test]
    fn random_agent_is_deterministic_and_legal() {
        for kind in [EnvKind::GuessNum, EnvKind::Dfs, EnvKind::Bfs] {
            let case = testgen::gen_case(kind, Mode::Easy, 42);
            let agent = RandomAgent::new(9);
            let a = run_episode(&agent, &case, &RunConfig::default(), None).unwrap();
            let b = run_episode(&agent, &case, &RunConfig::default(), None).unwrap();
            assert!(crate::transcript::eq_ignoring_time(&a, &b));
            assert!(a
                .steps
                .iter()
                .all(|s| s.validity == Validity::Valid), "kind {kind:?}");
            assert_ne!(a.termination, Some(Termination::InvalidResponse));
        }
    }

    #[test]
    fn random_agents_with_different_seeds_diverge() {
        let case = testgen::gen_case(EnvKind::GuessNum, Mode::Easy, 42);
        let a = run_episode(&RandomAgent::new(1), &case, &RunConfig::default(), None).unwrap();
        let b = run_episode(&RandomAgent::new(2), &case, &RunConfig::default(), None).unwrap();
        let acts = |t: &crate::transcript::Transcript| {
            t.steps.iter().map(|s| s.action).collect::<Vec<_>>()
        };
        assert_ne!(acts(&a), acts(&b));
    }

    #[test]
    fn noisy_extremes_follow_and_defy() {
        let case = testgen::gen_case(EnvKind::Bfs, Mode::Easy, 5);
        let always = NoisyAgent::new(3, 1.0).unwrap();
        let t = run_episode(&always, &case, &RunConfig::default(), None).unwrap();
        assert_eq!(t.termination, Some(Termination::Solved));
        assert!(t.steps.iter().all(|s| s.following));

        let never = NoisyAgent::new(3, 0.0).unwrap();
        let t = run_episode(&never, &case, &RunConfig::default(), None).unwrap();
        // Every step is legal; follows happen only when forced.
        assert!(t.steps.iter().all(|s| s.validity == Validity::Valid));
        let m = score_transcript(&t).unwrap();
        let forced = t
            .steps
            .iter()
            .filter(|s| s.following)
            .count();
        assert_eq!(m.acc, forced as f64 / t.steps.len() as f64);
    }

    #[test]
    fn noisy_guess_never_plays_midpoint_when_defying() {
        let case = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 0, 64).unwrap();
        let never = NoisyAgent::new(11, 0.0).unwrap();
        let t = run_episode(&never, &case, &RunConfig::default(), None).unwrap();
        for step in &t.steps {
            assert_eq!(step.validity, Validity::Valid);
            assert!(!step.following || step.index == t.steps.len() as u32);
        }
    }

    #[test]
    fn noisy_rejects_bad_probability() {
        assert!(NoisyAgent::new(0, -0.1).is_err());
        assert!(NoisyAgent::new(0, 1.1).is_err());
    }

    #[test]
    fn invalid_after_star_dfs_frozen_values() {
        let case = star_dfs_case();
        let agent = InvalidAfterAgent::new(2);
        let t = run_episode(&agent, &case, &RunConfig::default(), None).unwrap();
        assert_eq!(t.steps.len(), 3);
        assert_eq!(t.termination, Some(Termination::InvalidResponse));
        assert_eq!(t.steps[0].committed, Some(1));
        assert_eq!(t.steps[1].committed, Some(0));
        assert_eq!(t.steps[2].validity, Validity::Invalid);
        let m = score_transcript(&t).unwrap();
        assert_eq!(m.g_sum, Some(2.25));
        assert_eq!(m.g_min, Some(0.75));
        assert_eq!(m.k_total, 3);
    }

    #[test]
    fn invalid_after_guess_goes_out_of_range() {
        let case = TestCase::guess(EnvKind::Coin, Mode::Easy, 0, 100).unwrap();
        let agent = InvalidAfterAgent::new(1);
        let t = run_episode(&agent, &case, &RunConfig::default(), None).unwrap();
        assert_eq!(t.steps.len(), 2);
        assert_eq!(t.steps[1].action, Some(32_801));
        assert_eq!(t.steps[1].validity, Validity::Invalid);
        assert_eq!(t.termination, Some(Termination::InvalidResponse));
    }

    #[test]
    fn psacc_of_perfect_play_is_one() {
        let rows: Vec<FollowRow> = (0..20)
            .map(|seed| {
                let case = testgen::gen_case(EnvKind::Dfs, Mode::Easy, seed);
                let t = run_episode(&OracleAgent, &case, &RunConfig::default(), None).unwrap();
                let m = score_transcript(&t).unwrap();
                FollowRow {
                    flags: m.follow_flags.clone(),
                    k_max: crate::oracle::k_max(&case).unwrap(),
                }
            })
            .collect();
        let curve = crate::metrics::psacc(&rows).unwrap();
        assert!(curve.iter().all(|&v| v == 1.0));
        assert_eq!(crate::metrics::psacc_avg(&rows).unwrap(), 1.0);
    }
}
