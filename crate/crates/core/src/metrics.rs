//! Goal, policy, and adherence metrics, plus cross-run aggregation.
//!
//! Conventions, fixed here and relied on by the scoring pipeline:
//! - Guess-family error terms use only valid guesses; an episode with no valid
//!   guess scores exactly 1.0 on both `err_min` and `err_sum`.
//! - `err_min` takes the minimum per-step error (best guess); the literal
//!   maximum form is available as [`err_max`] for compatibility with the
//!   printed formula, but nothing in the harness consumes it.
//! - Coverage sums run over the steps actually taken — an episode that ends
//!   early accumulates fewer terms, never padded ones. Invalid or unparseable
//!   steps repeat the previous visited count.
//! - `acc` divides following steps by all steps taken; no steps means 0.0.
//! - `psacc` grades teacher-guided runs per oracle step k; its denominator for
//!   step k counts only cases whose oracle needs at least k steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    CasePayload, EnvError, EnvKind, EnvState, Family, Mode, Termination, TestCase, Validity,
};
use crate::oracle;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no values to aggregate")]
    Empty,
    #[error("follow row {index} has {flags} flags but k_max {k_max}")]
    RowTooLong {
        index: usize,
        flags: usize,
        k_max: u32,
    },
    #[error("no case reaches oracle step {step}")]
    UncoveredStep { step: u32 },
}

/// Normalized distance of the best guess from the target; 1.0 with no guesses.
pub fn err_min(guesses: &[i64], target: i64, low: i64, high: i64) -> f64 {
    let span = (high - low + 1) as f64;
    guesses
        .iter()
        .map(|g| (g - target).abs() as f64 / span)
        .fold(None, |acc: Option<f64>, e| {
            Some(acc.map_or(e, |a| a.min(e)))
        })
        .unwrap_or(1.0)
}

/// Normalized distance of the worst guess from the target; 1.0 with no guesses.
/// Compatibility variant of [`err_min`] matching the printed max form; unused
/// by the scoring pipeline.
pub fn err_max(guesses: &[i64], target: i64, low: i64, high: i64) -> f64 {
    let span = (high - low + 1) as f64;
    guesses
        .iter()
        .map(|g| (g - target).abs() as f64 / span)
        .fold(None, |acc: Option<f64>, e| {
            Some(acc.map_or(e, |a| a.max(e)))
        })
        .unwrap_or(1.0)
}

/// Sum of per-step normalized guess errors; 1.0 with no guesses.
pub fn err_sum(guesses: &[i64], target: i64, low: i64, high: i64) -> f64 {
    if guesses.is_empty() {
        return 1.0;
    }
    let span = (high - low + 1) as f64;
    guesses
        .iter()
        .map(|g| (g - target).abs() as f64 / span)
        .sum()
}

/// Final uncovered fraction of the tree: `1 - max_i |visited_i| / M`.
/// An empty timeline means only the start node was ever visited.
pub fn coverage_min(timeline: &[usize], node_count: usize) -> f64 {
    let best = timeline.iter().copied().max().unwrap_or(1);
    1.0 - best as f64 / node_count as f64
}

/// Sum over steps taken of the uncovered fraction after each step.
pub fn coverage_sum(timeline: &[usize], node_count: usize) -> f64 {
    timeline
        .iter()
        .map(|&v| 1.0 - v as f64 / node_count as f64)
        .sum()
}

/// Fraction of steps that followed the algorithm; 0.0 for an empty episode.
pub fn acc(follow_flags: &[bool]) -> f64 {
    if follow_flags.is_empty() {
        return 0.0;
    }
    follow_flags.iter().filter(|&&f| f).count() as f64 / follow_flags.len() as f64
}

/// One teacher-guided episode's adherence record: the per-oracle-step follow
/// flags and how many steps the oracle needs on that case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowRow {
    pub flags: Vec<bool>,
    pub k_max: u32,
}

/// Per-step adherence across a set: element k-1 is `N_k / N-hat_k`, where
/// `N_k` counts cases following at oracle step k and `N-hat_k` counts cases
/// whose oracle trajectory has at least k steps.
pub fn psacc(rows: &[FollowRow]) -> Result<Vec<f64>, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    for (index, row) in rows.iter().enumerate() {
        if row.flags.len() > row.k_max as usize {
            return Err(MetricsError::RowTooLong {
                index,
                flags: row.flags.len(),
                k_max: row.k_max,
            });
        }
    }
    let overall_max = rows.iter().map(|r| r.k_max).max().unwrap();
    let mut result = Vec::with_capacity(overall_max as usize);
    for k in 1..=overall_max {
        let eligible = rows.iter().filter(|r| r.k_max >= k).count();
        if eligible == 0 {
            return Err(MetricsError::UncoveredStep { step: k });
        }
        let following = rows
            .iter()
            .filter(|r| r.flags.get(k as usize - 1).copied().unwrap_or(false))
            .count();
        result.push(following as f64 / eligible as f64);
    }
    Ok(result)
}

/// Mean of the per-step adherence values over `k = 1..=K_max`.
pub fn psacc_avg(rows: &[FollowRow]) -> Result<f64, MetricsError> {
    let per_step = psacc(rows)?;
    Ok(per_step.iter().sum::<f64>() / per_step.len() as f64)
}

/// Mean and distance to the extremes across repeated runs of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub avg: f64,
    pub margin_min: f64,
    pub margin_max: f64,
}

/// Aggregate repeated measurements: mean, mean minus minimum, maximum minus
/// mean. Summation runs in slice order for bitwise reproducibility.
pub fn aggregate(values: &[f64]) -> Result<Summary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let avg = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Summary {
        avg,
        margin_min: avg - min,
        margin_max: max - avg,
    })
}

/// Everything the scorer derives from one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub kind: EnvKind,
    pub mode: Mode,
    /// Goal/policy errors for guess-family episodes, `None` otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub err_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub err_sum: Option<f64>,
    /// Coverage metrics for traversal-family episodes, `None` otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_sum: Option<f64>,
    pub acc: f64,
    pub k_total: u32,
    pub follow_flags: Vec<bool>,
    pub termination: Option<Termination>,
}

/// One step as the scorer sees it: what the agent proposed (`None` when its
/// reply had no integer) and what was committed to the environment (`None`
/// when nothing was — an unparseable reply outside teacher guidance).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoredAction {
    pub proposed: Option<i64>,
    pub committed: Option<i64>,
}

/// Replay an episode's actions from scratch, recomputing validity and follow
/// flags with the oracle, and derive its metrics. This is the single scoring
/// path used both live and offline, so persisted transcripts are sufficient
/// to reproduce every reported number.
pub fn score_actions(
    case: &TestCase,
    budget: u32,
    actions: &[ScoredAction],
) -> Result<EpisodeMetrics, EnvError> {
    let (mut state, _) = EnvState::reset_with_budget(case, budget)?;
    let mut guesses = Vec::new();
    let mut timeline = Vec::new();
    let mut follow_flags = Vec::new();
    let mut termination = None;
    let mut visited_count = 1usize;
    for step in actions {
        if termination.is_some() {
            return Err(EnvError::AlreadyTerminated);
        }
        follow_flags.push(
            step.proposed
                .is_some_and(|a| oracle::is_following(&state, a)),
        );
        match step.committed {
            Some(action) => {
                let outcome = state.step(action)?;
                if outcome.validity == Validity::Valid
                    && case.kind.family() == Family::Guess
                {
                    guesses.push(action);
                }
                if let Some(v) = state.visited() {
                    visited_count = v.len();
                }
                termination = outcome.termination;
            }
            // Nothing reached the environment: the reply was unparseable and
            // the episode ends as an invalid response.
            None => termination = Some(Termination::InvalidResponse),
        }
        timeline.push(visited_count);
    }
    let (err_min_v, err_sum_v, g_min_v, g_sum_v) = match (&case.payload, case.kind.family()) {
        (CasePayload::Guess { low, high, target }, _) => (
            Some(err_min(&guesses, *target, *low, *high)),
            Some(err_sum(&guesses, *target, *low, *high)),
            None,
            None,
        ),
        (CasePayload::Tree { node_count, .. }, _) => (
            None,
            None,
            Some(coverage_min(&timeline, *node_count)),
            Some(coverage_sum(&timeline, *node_count)),
        ),
    };
    Ok(EpisodeMetrics {
        kind: case.kind,
        mode: case.mode,
        err_min: err_min_v,
        err_sum: err_sum_v,
        g_min: g_min_v,
        g_sum: g_sum_v,
        acc: acc(&follow_flags),
        k_total: actions.len() as u32,
        follow_flags,
        termination,
    })
}
