//! Persistent episode records.
//!
//! A run is stored as line-delimited JSON: per episode one `episode_start`
//! record, one `step` record per step, and one `episode_end` record (see
//! docs/formats.md). Transcripts are replay-deterministic up to the wall-clock
//! field `elapsed_ms`; [`eq_ignoring_time`] compares everything else.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Termination, TestCase, Validity};
use crate::metrics::ScoredAction;
use crate::runner::{ParsePolicy, Protocol};

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("record at line {line} belongs to no open episode")]
    OrphanRecord { line: usize },
    #[error("file ended inside episode {episode}")]
    UnterminatedEpisode { episode: usize },
}

/// One agent interaction: what was asked, what came back, how it was judged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptStep {
    /// 1-based step number within the episode.
    pub index: u32,
    /// Chained digest of the rendered context this step was asked with.
    pub context_digest: String,
    /// The agent's reply, verbatim.
    pub raw: String,
    /// Integer parsed from the reply; `None` when parsing failed.
    pub action: Option<i64>,
    /// Action applied to the environment: the parsed action normally, the
    /// oracle action under teacher guidance, `None` when nothing was applied.
    pub committed: Option<i64>,
    pub validity: Validity,
    /// Whether the *proposed* action followed the optimal algorithm.
    pub following: bool,
    /// Rendered feedback produced by the step, absent for rejected actions.
    pub observation: Option<String>,
    /// Wall-clock time spent in the agent call; excluded from equality checks.
    pub elapsed_ms: u64,
}

impl TranscriptStep {
    pub fn scored(&self) -> ScoredAction {
        ScoredAction {
            proposed: self.action,
            committed: self.committed,
        }
    }
}

/// Full record of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub case: TestCase,
    pub protocol: Protocol,
    pub budget: u32,
    pub parse_policy: ParsePolicy,
    /// Redacted agent descriptor (never credentials).
    pub agent: String,
    pub steps: Vec<TranscriptStep>,
    pub termination: Option<Termination>,
    /// Transport failure that cut the episode short; aborted episodes carry
    /// no metrics and are only counted.
    pub aborted: Option<String>,
}

impl Transcript {
    pub fn scored_actions(&self) -> Vec<ScoredAction> {
        self.steps.iter().map(TranscriptStep::scored).collect()
    }
}

/// Transcript equality modulo wall-clock fields.
pub fn eq_ignoring_time(a: &Transcript, b: &Transcript) -> bool {
    let strip = |t: &Transcript| {
        let mut t = t.clone();
        for step in &mut t.steps {
            step.elapsed_ms = 0;
        }
        t
    };
    strip(a) == strip(b)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    EpisodeStart {
        episode: usize,
        case: TestCase,
        protocol: Protocol,
        budget: u32,
        parse_policy: ParsePolicy,
        agent: String,
    },
    Step {
        episode: usize,
        #[serde(flatten)]
        step: TranscriptStep,
    },
    EpisodeEnd {
        episode: usize,
        steps: usize,
        termination: Option<Termination>,
        aborted: Option<String>,
    },
}

pub fn write_all<W: Write>(mut w: W, transcripts: &[Transcript]) -> Result<(), TranscriptError> {
    for (episode, t) in transcripts.iter().enumerate() {
        let start = Record::EpisodeStart {
            episode,
            case: t.case.clone(),
            protocol: t.protocol,
            budget: t.budget,
            parse_policy: t.parse_policy,
            agent: t.agent.clone(),
        };
        serde_json::to_writer(&mut w, &start).map_err(io_err)?;
        w.write_all(b"\n")?;
        for step in &t.steps {
            let record = Record::Step {
                episode,
                step: step.clone(),
            };
            serde_json::to_writer(&mut w, &record).map_err(io_err)?;
            w.write_all(b"\n")?;
        }
        let end = Record::EpisodeEnd {
            episode,
            steps: t.steps.len(),
            termination: t.termination,
            aborted: t.aborted.clone(),
        };
        serde_json::to_writer(&mut w, &end).map_err(io_err)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn io_err(e: serde_json::Error) -> TranscriptError {
    TranscriptError::Io(std::io::Error::other(e))
}

pub fn write_to_path(path: &Path, transcripts: &[Transcript]) -> Result<(), TranscriptError> {
    let mut buf = Vec::new();
    write_all(&mut buf, transcripts)?;
    Ok(std::fs::write(path, buf)?)
}

pub fn read_all<R: BufRead>(r: R) -> Result<Vec<Transcript>, TranscriptError> {
    let mut transcripts: Vec<Transcript> = Vec::new();
    let mut open: Option<(usize, Transcript)> = None;
    for (line_no, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| TranscriptError::Record {
            line: line_no + 1,
            message: e.to_string(),
        })?;
        match record {
            Record::EpisodeStart {
                episode,
                case,
                protocol,
                budget,
                parse_policy,
                agent,
            } => {
                if let Some((open_episode, _)) = &open {
                    return Err(TranscriptError::UnterminatedEpisode {
                        episode: *open_episode,
                    });
                }
                open = Some((
                    episode,
                    Transcript {
                        case,
                        protocol,
                        budget,
                        parse_policy,
                        agent,
                        steps: Vec::new(),
                        termination: None,
                        aborted: None,
                    },
                ));
            }
            Record::Step { episode, step } => match &mut open {
                Some((open_episode, t)) if *open_episode == episode => t.steps.push(step),
                _ => return Err(TranscriptError::OrphanRecord { line: line_no + 1 }),
            },
            Record::EpisodeEnd {
                episode,
                steps,
                termination,
                aborted,
            } => match open.take() {
                Some((open_episode, mut t)) if open_episode == episode => {
                    if t.steps.len() != steps {
                        return Err(TranscriptError::Record {
                            line: line_no + 1,
                            message: format!(
                                "episode {episode} ends claiming {steps} steps, saw {}",
                                t.steps.len()
                            ),
                        });
                    }
                    t.termination = termination;
                    t.aborted = aborted;
                    transcripts.push(t);
                }
                _ => return Err(TranscriptError::OrphanRecord { line: line_no + 1 }),
            },
        }
    }
    if let Some((episode, _)) = open {
        return Err(TranscriptError::UnterminatedEpisode { episode });
    }
    Ok(transcripts)
}

pub fn read_from_path(path: &Path) -> Result<Vec<Transcript>, TranscriptError> {
    let file = std::fs::File::open(path)?;
    read_all(std::io::BufReader::new(file))
}
