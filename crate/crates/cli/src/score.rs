//! Offline scoring: replay persisted transcripts through the shared scoring
//! path and aggregate per-episode metrics into set-level summaries.
//!
//! Aborted episodes (transport failures) carry no agent decisions, so they
//! are listed but excluded from every mean. Per-step adherence is reported
//! for teacher-guided runs only, where step k of every episode aligns with
//! oracle step k.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use seqbench_core::metrics::{psacc, psacc_avg, EpisodeMetrics, FollowRow};
use seqbench_core::oracle;
use seqbench_core::runner::{score_transcript, ParsePolicy, Protocol};
use seqbench_core::transcript::Transcript;
use seqbench_core::{EnvKind, Family, Mode, Termination};

pub const SCORES_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<EpisodeMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub episodes: usize,
    pub scored: usize,
    pub aborted: usize,
    pub solved: usize,
    pub budget_exhausted: usize,
    pub invalid_response: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err_min_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err_sum_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_min_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_sum_mean: Option<f64>,
    pub acc_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psacc: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psacc_avg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScores {
    pub format_version: u32,
    pub kind: EnvKind,
    pub mode: Mode,
    pub protocol: Protocol,
    pub parse_policy: ParsePolicy,
    pub budget: u32,
    pub agent: String,
    pub summary: SetSummary,
    pub rows: Vec<ScoreRow>,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Score a homogeneous transcript file (one kind/mode/protocol/agent run).
pub fn score_transcripts(transcripts: &[Transcript]) -> anyhow::Result<RunScores> {
    let first = transcripts
        .first()
        .context("transcript file contains no episodes")?;
    for t in transcripts {
        if t.case.kind != first.case.kind
            || t.case.mode != first.case.mode
            || t.protocol != first.protocol
            || t.parse_policy != first.parse_policy
            || t.budget != first.budget
            || t.agent != first.agent
        {
            anyhow::bail!(
                "mixed runs in one transcript file: {}/{} vs {}/{}",
                first.case.kind,
                first.protocol,
                t.case.kind,
                t.protocol
            );
        }
    }

    let mut rows = Vec::with_capacity(transcripts.len());
    let mut scored_metrics = Vec::new();
    let mut follow_rows = Vec::new();
    for t in transcripts {
        if let Some(reason) = &t.aborted {
            rows.push(ScoreRow {
                seed: t.case.seed,
                aborted: Some(reason.clone()),
                metrics: None,
            });
            continue;
        }
        let metrics = score_transcript(t)
            .with_context(|| format!("replay failed for case seed {}", t.case.seed))?;
        if first.protocol == Protocol::TeacherGuided {
            follow_rows.push(FollowRow {
                flags: metrics.follow_flags.clone(),
                k_max: oracle::k_max(&t.case)?,
            });
        }
        rows.push(ScoreRow {
            seed: t.case.seed,
            aborted: None,
            metrics: Some(metrics.clone()),
        });
        scored_metrics.push(metrics);
    }

    let count = |t: Termination| {
        scored_metrics
            .iter()
            .filter(|m| m.termination == Some(t))
            .count()
    };
    let collect = |f: fn(&EpisodeMetrics) -> Option<f64>| -> Vec<f64> {
        scored_metrics.iter().filter_map(f).collect()
    };
    let is_guess = first.case.kind.family() == Family::Guess;
    let (psacc_curve, psacc_mean) = if first.protocol == Protocol::TeacherGuided
        && !follow_rows.is_empty()
    {
        (Some(psacc(&follow_rows)?), Some(psacc_avg(&follow_rows)?))
    } else {
        (None, None)
    };
    let summary = SetSummary {
        episodes: transcripts.len(),
        scored: scored_metrics.len(),
        aborted: transcripts.len() - scored_metrics.len(),
        solved: count(Termination::Solved),
        budget_exhausted: count(Termination::BudgetExhausted),
        invalid_response: count(Termination::InvalidResponse),
        err_min_mean: if is_guess {
            mean(&collect(|m| m.err_min))
        } else {
            None
        },
        err_sum_mean: if is_guess {
            mean(&collect(|m| m.err_sum))
        } else {
            None
        },
        g_min_mean: if is_guess {
            None
        } else {
            mean(&collect(|m| m.g_min))
        },
        g_sum_mean: if is_guess {
            None
        } else {
            mean(&collect(|m| m.g_sum))
        },
        acc_mean: mean(
            &scored_metrics
                .iter()
                .map(|m| m.acc)
                .collect::<Vec<f64>>(),
        )
        .unwrap_or(0.0),
        psacc: psacc_curve,
        psacc_avg: psacc_mean,
    };
    Ok(RunScores {
        format_version: SCORES_VERSION,
        kind: first.case.kind,
        mode: first.case.mode,
        protocol: first.protocol,
        parse_policy: first.parse_policy,
        budget: first.budget,
        agent: first.agent.clone(),
        summary,
        rows,
    })
}

impl RunScores {
    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("write {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<RunScores> {
        let text =
            fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
        let scores: RunScores = serde_json::from_str(&text)
            .with_context(|| format!("parse scores {}", path.display()))?;
        if scores.format_version != SCORES_VERSION {
            anyhow::bail!(
                "unsupported scores version {} in {}",
                scores.format_version,
                path.display()
            );
        }
        Ok(scores)
    }
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn csv_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Per-episode rows as CSV.
pub fn episodes_csv(scores: &RunScores) -> String {
    let mut out = String::from(
        "seed,kind,mode,protocol,agent,termination,k_total,acc,err_min,err_sum,g_min,g_sum,aborted\n",
    );
    for row in &scores.rows {
        let termination = row
            .metrics
            .as_ref()
            .and_then(|m| m.termination)
            .map(|t| {
                serde_json::to_value(t)
                    .expect("termination serializes")
                    .as_str()
                    .expect("termination is a string")
                    .to_string()
            })
            .unwrap_or_default();
        let m = row.metrics.as_ref();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.seed,
            scores.kind,
            scores.mode,
            scores.protocol,
            csv_field(&scores.agent),
            termination,
            m.map(|m| m.k_total.to_string()).unwrap_or_default(),
            m.map(|m| format!("{:.6}", m.acc)).unwrap_or_default(),
            csv_opt(m.and_then(|m| m.err_min)),
            csv_opt(m.and_then(|m| m.err_sum)),
            csv_opt(m.and_then(|m| m.g_min)),
            csv_opt(m.and_then(|m| m.g_sum)),
            csv_field(row.aborted.as_deref().unwrap_or_default()),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use seqbench_core::agents::scripted::{OracleAgent, SilentAgent};
    use seqbench_core::runner::{run_cases, RunConfig};
    use seqbench_core::testgen;

    fn run(kind: EnvKind, n: u64, protocol: Protocol) -> Vec<Transcript> {
        let cases: Vec<_> = (0..n).map(|s| testgen::gen_case(kind, Mode::Easy, s)).collect();
        let config = RunConfig {
            protocol,
            ..RunConfig::default()
        };
        run_cases(&OracleAgent, &cases, &config, None, 2).unwrap()
    }

    #[test]
    fn oracle_set_scores_are_perfect() {
        let scores = score_transcripts(&run(EnvKind::GuessNum, 10, Protocol::ZeroShot)).unwrap();
        assert_eq!(scores.summary.scored, 10);
        assert_eq!(scores.summary.solved, 10);
        assert_eq!(scores.summary.err_min_mean, Some(0.0));
        assert_eq!(scores.summary.acc_mean, 1.0);
        assert_eq!(scores.summary.g_sum_mean, None);
        assert_eq!(scores.summary.psacc, None);
    }

    #[test]
    fn teacher_guided_scores_include_psacc() {
        let scores = score_transcripts(&run(EnvKind::Bfs, 6, Protocol::TeacherGuided)).unwrap();
        assert_eq!(scores.summary.psacc_avg, Some(1.0));
        assert!(scores.summary.psacc.unwrap().iter().all(|&v| v == 1.0));
        assert_eq!(scores.summary.g_min_mean, Some(0.0));
    }

    #[test]
    fn mixed_files_are_rejected() {
        let mut transcripts = run(EnvKind::GuessNum, 2, Protocol::ZeroShot);
        transcripts.extend(run(EnvKind::Dfs, 1, Protocol::ZeroShot));
        assert!(score_transcripts(&transcripts).is_err());
    }

    #[test]
    fn csv_has_one_line_per_episode() {
        let cases: Vec<_> = (0..3)
            .map(|s| testgen::gen_case(EnvKind::Coin, Mode::Easy, s))
            .collect();
        let transcripts =
            run_cases(&SilentAgent, &cases, &RunConfig::default(), None, 1).unwrap();
        let scores = score_transcripts(&transcripts).unwrap();
        assert_eq!(scores.summary.invalid_response, 3);
        assert_eq!(scores.summary.err_min_mean, Some(1.0));
        let csv = episodes_csv(&scores);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().contains("invalid_response"));
    }

    #[test]
    fn save_load_round_trip() {
        let scores = score_transcripts(&run(EnvKind::Dfs, 4, Protocol::ZeroShot)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.json");
        scores.save(&path).unwrap();
        assert_eq!(RunScores::load(&path).unwrap(), scores);
    }
}
