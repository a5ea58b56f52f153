//! Known-optimal policies and per-step adherence checks.
//!
//! For guessing, the optimal policy is floor-midpoint bisection over the
//! feedback-implied interval. For DFS, it is "enter an unvisited neighbor,
//! otherwise backtrack through the first-entry parent". For BFS, a step
//! follows the algorithm iff it visits a frontier node of minimal depth
//! (level order); among several following actions the oracle plays the
//! smallest node id, making oracle trajectories canonical.

use crate::env::{Comparison, EnvError, EnvState, Family, Termination, TestCase};

/// Floor midpoint of a non-empty inclusive interval.
///
/// Panics on an empty interval: callers own the `lo <= hi` precondition.
pub fn optimal_guess(lo: i64, hi: i64) -> i64 {
    assert!(lo <= hi, "empty interval ({lo}, {hi})");
    lo + (hi - lo) / 2
}

/// Shrink a feasible interval according to feedback for `guess`.
///
/// Panics (contract violation) if `guess` lies outside the interval or the
/// feedback empties it — neither can happen with environment-produced feedback.
pub fn update_bounds(lo: i64, hi: i64, guess: i64, comparison: Comparison) -> (i64, i64) {
    assert!(
        lo <= hi && (lo..=hi).contains(&guess),
        "guess {guess} outside interval ({lo}, {hi})"
    );
    let updated = match comparison {
        Comparison::TargetBigger => (guess + 1, hi),
        Comparison::TargetLower => (lo, guess - 1),
        Comparison::Correct => (guess, guess),
    };
    assert!(
        updated.0 <= updated.1,
        "feedback {comparison:?} for {guess} empties ({lo}, {hi})"
    );
    updated
}

/// BFS depth of every node from the start of the tree.
pub fn node_depths(adjacency: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut depth = vec![usize::MAX; adjacency.len()];
    depth[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for &m in &adjacency[n] {
            if depth[m] == usize::MAX {
                depth[m] = depth[n] + 1;
                queue.push_back(m);
            }
        }
    }
    depth
}

/// Actions that follow the DFS algorithm from this state: every unvisited
/// neighbor of the current node, or, with none left, the first-entry parent.
/// Empty when the traversal is complete or the walk is stuck at the root.
pub fn dfs_following_actions(state: &EnvState) -> Vec<usize> {
    let current = state.current_node().expect("DFS state has a current node");
    let visited = state.visited().expect("DFS state has a visited set");
    let neighbors = state.neighbors(current).expect("current node exists");
    let unvisited: Vec<usize> = neighbors
        .iter()
        .copied()
        .filter(|n| !visited.contains(n))
        .collect();
    if !unvisited.is_empty() {
        return unvisited;
    }
    if visited.len() == state.adjacency().unwrap().len() {
        return Vec::new();
    }
    match state.entry_parent(current) {
        Some(parent) => vec![parent],
        None => Vec::new(),
    }
}

/// Actions that follow the BFS algorithm from this state: the unvisited
/// frontier nodes of minimal depth. Empty when the traversal is complete.
pub fn bfs_following_actions(state: &EnvState) -> Vec<usize> {
    let visited = state.visited().expect("BFS state has a visited set");
    let adjacency = state.adjacency().expect("BFS state has adjacency");
    let depths = node_depths(adjacency, 0);
    let mut frontier: Vec<usize> = (0..adjacency.len())
        .filter(|n| !visited.contains(n))
        .filter(|n| adjacency[*n].iter().any(|m| visited.contains(m)))
        .collect();
    let Some(min_depth) = frontier.iter().map(|&n| depths[n]).min() else {
        return Vec::new();
    };
    frontier.retain(|&n| depths[n] == min_depth);
    frontier
}

/// Whether `action` follows the optimal algorithm from `state`.
/// For guessing this means the exact floor midpoint of the implied interval.
pub fn is_following(state: &EnvState, action: i64) -> bool {
    match state.case().kind.family() {
        Family::Guess => {
            let (lo, hi) = state.guess_interval().expect("guess state has an interval");
            action == optimal_guess(lo, hi)
        }
        Family::Dfs => usize::try_from(action)
            .is_ok_and(|a| dfs_following_actions(state).contains(&a)),
        Family::Bfs => usize::try_from(action)
            .is_ok_and(|a| bfs_following_actions(state).contains(&a)),
    }
}

/// The oracle's move from `state`: the canonical following action
/// (smallest node id for trees). `None` once the episode is over or no
/// following action exists.
pub fn optimal_action(state: &EnvState) -> Option<i64> {
    if state.termination().is_some() {
        return None;
    }
    match state.case().kind.family() {
        Family::Guess => {
            let (lo, hi) = state.guess_interval()?;
            Some(optimal_guess(lo, hi))
        }
        Family::Dfs => dfs_following_actions(state).first().map(|&n| n as i64),
        Family::Bfs => bfs_following_actions(state).first().map(|&n| n as i64),
    }
}

/// Play the oracle from reset to termination; returns the action sequence.
///
/// Oracle self-play must solve every valid case within the step budget;
/// anything else is reported as an invalid case.
pub fn optimal_trajectory(case: &TestCase) -> Result<Vec<i64>, EnvError> {
    let (mut state, _) = EnvState::reset(case)?;
    let mut actions = Vec::new();
    while state.termination().is_none() {
        let action = optimal_action(&state).ok_or_else(|| {
            EnvError::InvalidCase("oracle has no move before termination".into())
        })?;
        let outcome = state.step(action)?;
        debug_assert_eq!(outcome.validity, crate::env::Validity::Valid);
        actions.push(action);
    }
    if state.termination() != Some(Termination::Solved) {
        return Err(EnvError::InvalidCase(format!(
            "oracle failed to solve case (seed {}) within budget",
            case.seed
        )));
    }
    Ok(actions)
}

/// Number of steps the oracle needs for this case.
pub fn k_max(case: &TestCase) -> Result<u32, EnvError> {
    Ok(optimal_trajectory(case)?.len() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvKind, Mode, TestCase};

    #[test]
    fn midpoint_is_floor() {
        assert_eq!(optimal_guess(32, 32_800), 16_416);
        assert_eq!(optimal_guess(32, 16_415), 8_223);
        assert_eq!(optimal_guess(64, 64), 64);
        assert_eq!(optimal_guess(64, 65), 64);
        assert_eq!(optimal_guess(0, 1), 0);
    }

    #[test]
    #[should_panic(expected = "empty interval")]
    fn midpoint_rejects_empty_interval() {
        optimal_guess(5, 4);
    }

    #[test]
    fn bounds_updates() {
        assert_eq!(
            update_bounds(32, 32_800, 16_416, Comparison::TargetLower),
            (32, 16_415)
        );
        assert_eq!(
            update_bounds(32, 16_415, 8_223, Comparison::TargetBigger),
            (8_224, 16_415)
        );
        assert_eq!(update_bounds(60, 70, 64, Comparison::Correct), (64, 64));
    }

    #[test]
    #[should_panic(expected = "outside interval")]
    fn bounds_update_rejects_foreign_guess() {
        update_bounds(10, 20, 25, Comparison::TargetLower);
    }

    #[test]
    #[should_panic(expected = "empties")]
    fn bounds_update_rejects_contradictory_feedback() {
        update_bounds(10, 20, 20, Comparison::TargetBigger);
    }

    #[test]
    fn bisection_trajectory_for_target_64_easy() {
        let case = TestCase::guess(EnvKind::GuessNum, Mode::Easy, 0, 64).unwrap();
        let trajectory = optimal_trajectory(&case).unwrap();
        assert_eq!(
            trajectory,
            vec![
                16_416, 8_223, 4_127, 2_079, 1_055, 543, 287, 159, 95, 63, 79, 71, 67, 65, 64
            ]
        );
        assert_eq!(k_max(&case).unwrap(), 15);
    }

    #[test]
    fn dfs_star_trajectory_backtracks_through_center() {
        let case = TestCase::tree(
            EnvKind::Dfs,
            Mode::Easy,
            0,
            (1..8).map(|n| (0, n)).collect(),
        )
        .unwrap();
        let trajectory = optimal_trajectory(&case).unwrap();
        assert_eq!(trajectory, vec![1, 0, 2, 0, 3, 0, 4, 0, 5, 0, 6, 0, 7]);
        assert_eq!(k_max(&case).unwrap(), 13); // 2(M-1) - depth(last leaf) = 14 - 1
    }

    #[test]
    fn dfs_prefers_unvisited_then_parent() {
        // 0 - 1 - 3, 0 - 2 chain/fork: from 3 (leaf) the only following move is back to 1.
        let case = TestCase::tree(
            EnvKind::Dfs,
            Mode::Easy,
            0,
            vec![(0, 1), (1, 3), (0, 2), (3, 4), (4, 5), (5, 6), (6, 7)],
        )
        .unwrap();
        let (mut state, _) = EnvState::reset(&case).unwrap();
        assert_eq!(dfs_following_actions(&state), vec![1, 2]);
        assert!(is_following(&state, 2));
        assert!(!is_following(&state, 5));
        state.step(1).unwrap();
        assert_eq!(dfs_following_actions(&state), vec![3]);
        state.step(3).unwrap();
        state.step(4).unwrap();
        state.step(5).unwrap();
        state.step(6).unwrap();
        state.step(7).unwrap();
        // At leaf 7: nothing unvisited, so follow = backtrack to 6.
        assert_eq!(dfs_following_actions(&state), vec![6]);
        assert!(is_following(&state, 6));
        assert!(!is_following(&state, -1));
    }

    #[test]
    fn dfs_stuck_at_root_has_empty_following_set() {
        // Star: wander 0 -> 1 -> 0; from 0 all neighbors... 1 visited, 2..7 not — take
        // a path case instead: 0-1, 1-2, ... so root 0 has a single neighbor.
        let case = TestCase::tree(
            EnvKind::Dfs,
            Mode::Easy,
            0,
            (0..7).map(|n| (n, n + 1)).collect(),
        )
        .unwrap();
        let (mut state, _) = EnvState::reset(&case).unwrap();
        state.step(1).unwrap();
        state.step(0).unwrap();
        // Node 0's only neighbor (1) is visited, traversal incomplete, no parent.
        assert_eq!(dfs_following_actions(&state), Vec::<usize>::new());
        assert_eq!(optimal_action(&state), None);
        assert!(!is_following(&state, 1));
    }

    #[test]
    fn bfs_level_order_following() {
        // Tree: 0-1, 0-2, 1-3 (+ tail to fill 15 nodes): after visiting 1,
        // node 2 (depth 1) follows but node 3 (depth 2) does not.
        let mut edges = vec![(0, 1), (0, 2), (1, 3)];
        edges.extend((3..14).map(|n| (n, n + 1)));
        let case = TestCase::tree(EnvKind::Bfs, Mode::Easy, 0, edges).unwrap();
        let (mut state, _) = EnvState::reset(&case).unwrap();
        assert_eq!(bfs_following_actions(&state), vec![1, 2]);
        state.step(1).unwrap();
        assert_eq!(bfs_following_actions(&state), vec![2]);
        assert!(!is_following(&state, 3));
        state.step(2).unwrap();
        assert_eq!(bfs_following_actions(&state), vec![3]);
    }

    #[test]
    fn bfs_star_visits_leaves_in_id_order() {
        let case = TestCase::tree(
            EnvKind::Bfs,
            Mode::Easy,
            0,
            (1..15).map(|n| (0, n)).collect(),
        )
        .unwrap();
        let trajectory = optimal_trajectory(&case).unwrap();
        assert_eq!(trajectory, (1..15).map(|n| n as i64).collect::<Vec<_>>());
        assert_eq!(k_max(&case).unwrap(), 14);
    }

    #[test]
    fn oracle_follows_itself() {
        for kind in EnvKind::BASE {
            for seed in 0..20 {
                let case = crate::testgen::gen_case(kind, Mode::Easy, seed);
                let (mut state, _) = EnvState::reset(&case).unwrap();
                while state.termination().is_none() {
                    let action = optimal_action(&state).unwrap();
                    assert!(is_following(&state, action), "{kind} seed {seed}");
                    state.step(action).unwrap();
                }
                assert_eq!(state.termination(), Some(Termination::Solved));
            }
        }
    }

    #[test]
    fn k_max_respects_canonical_bounds() {
        for seed in 0..50 {
            let guess = k_max(&crate::testgen::gen_case(EnvKind::GuessNum, Mode::Easy, seed)).unwrap();
            assert!(guess <= 16);
            let dfs = k_max(&crate::testgen::gen_case(EnvKind::Dfs, Mode::Easy, seed)).unwrap();
            assert!(dfs <= 14);
            let bfs = k_max(&crate::testgen::gen_case(EnvKind::Bfs, Mode::Easy, seed)).unwrap();
            assert_eq!(bfs, 14);
        }
    }
}
