//! `seqbench`: generate test sets, run agents over them, score transcripts,
//! build report tables, and serve episodes over HTTP.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use seqbench_cli::manifest::{now_unix, sha256_file, RunManifest, MANIFEST_VERSION};
use seqbench_cli::report;
use seqbench_cli::score::{episodes_csv, score_transcripts, RunScores};
use seqbench_cli::service;
use seqbench_core::agents::AgentSpec;
use seqbench_core::runner::{run_cases, ParsePolicy, Protocol, RunConfig};
use seqbench_core::testgen;
use seqbench_core::transcript;
use seqbench_core::{EnvKind, Mode};

#[derive(Parser)]
#[command(
    name = "seqbench",
    version,
    about = "Interactive algorithmic benchmark: seeded environments, optimal-policy \
             grading, and chat-agent evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    /// Accept the first integer anywhere in the reply.
    Lenient,
    /// Require the whole reply to be a single integer.
    Strict,
}

impl From<PolicyArg> for ParsePolicy {
    fn from(value: PolicyArg) -> ParsePolicy {
        match value {
            PolicyArg::Lenient => ParsePolicy::Lenient,
            PolicyArg::Strict => ParsePolicy::Strict,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded, deduplicated test set as JSONL.
    Gen {
        /// Environment: guess_num | dfs | bfs | coin | cave_dfs | cave_bfs
        #[arg(long)]
        kind: String,
        /// Difficulty: easy | hard
        #[arg(long)]
        mode: String,
        /// Master seed for the whole set.
        #[arg(long)]
        seed: u64,
        /// Number of cases (defaults to the mode's canonical set size).
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an agent over a test set and write JSONL transcripts.
    Run {
        /// Test set produced by `gen`.
        #[arg(long)]
        cases: PathBuf,
        /// oracle | silent | random:SEED | noisy:SEED:P | invalid-after:N | remote
        #[arg(long, default_value = "oracle")]
        agent: String,
        /// Chat-completions URL (remote agent).
        #[arg(long)]
        endpoint: Option<String>,
        /// Model name (remote agent).
        #[arg(long)]
        model: Option<String>,
        /// Environment variable holding the bearer token (remote agent).
        /// Only the variable name is recorded, never its value.
        #[arg(long, default_value = "SEQBENCH_API_TOKEN")]
        token_env: String,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        max_tokens: Option<u32>,
        #[arg(long, default_value_t = 4)]
        max_retries: u32,
        #[arg(long, default_value_t = 120)]
        timeout_secs: u64,
        /// Prepend N oracle-played example episodes to every context.
        #[arg(long, conflicts_with = "teacher_guided")]
        ice: Option<u32>,
        /// Donor set for example episodes (defaults to the cases file; the
        /// live case is always excluded by content).
        #[arg(long)]
        donors: Option<PathBuf>,
        /// Grade proposals but commit the oracle action each step.
        #[arg(long)]
        teacher_guided: bool,
        #[arg(long, value_enum, default_value_t = PolicyArg::Lenient)]
        parse_policy: PolicyArg,
        /// Step budget override (defaults to the mode's budget).
        #[arg(long)]
        budget: Option<u32>,
        /// Worker threads (defaults to the machine's available parallelism).
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write a provenance manifest here.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Replay transcripts offline and write per-set scores.
    Score {
        #[arg(long)]
        transcripts: PathBuf,
        /// Scores JSON output (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-episode CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Group score files and print a metrics table.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        scores: Vec<PathBuf>,
        /// Grouped CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Serve episodes over HTTP until interrupted.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8423")]
        addr: String,
    },
}

fn parse_kind(s: &str) -> anyhow::Result<EnvKind> {
    EnvKind::from_name(s).with_context(|| {
        format!(
            "unknown kind {s:?}; expected one of: {}",
            EnvKind::ALL
                .iter()
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join(", ")
        )
    })
}

fn parse_mode(s: &str) -> anyhow::Result<Mode> {
    Mode::from_name(s).with_context(|| format!("unknown mode {s:?}; expected easy or hard"))
}

fn cmd_gen(
    kind: &str,
    mode: &str,
    seed: u64,
    count: Option<usize>,
    out: &Path,
) -> anyhow::Result<()> {
    let kind = parse_kind(kind)?;
    let mode = parse_mode(mode)?;
    let count = count.unwrap_or(mode.canonical_case_count());
    let set = testgen::gen_set(kind, mode, seed, count)?;
    testgen::save(&set, out)?;
    eprintln!(
        "wrote {count} {kind}/{mode} cases (seed {seed}) to {}",
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    cases: &Path,
    agent: &str,
    endpoint: Option<String>,
    model: Option<String>,
    token_env: String,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
    max_retries: u32,
    timeout_secs: u64,
    ice: Option<u32>,
    donors: Option<PathBuf>,
    teacher_guided: bool,
    parse_policy: ParsePolicy,
    budget: Option<u32>,
    parallelism: Option<usize>,
    out: &Path,
    manifest_path: Option<PathBuf>,
) -> anyhow::Result<()> {
    let set = testgen::load(cases)?;
    let spec = if agent == "remote" {
        AgentSpec::Remote {
            endpoint: endpoint.context("--endpoint is required with --agent remote")?,
            model: model.context("--model is required with --agent remote")?,
            token_env,
            temperature,
            max_tokens,
            max_retries,
            timeout_secs,
        }
    } else {
        AgentSpec::parse_cli(agent)?
    };
    let built = spec.build()?;

    let protocol = if teacher_guided {
        Protocol::TeacherGuided
    } else {
        match ice {
            Some(examples) if examples > 0 => Protocol::InContext { examples },
            _ => Protocol::ZeroShot,
        }
    };
    let donor_path = match (&protocol, donors) {
        (Protocol::InContext { .. }, Some(path)) => Some(path),
        (Protocol::InContext { .. }, None) => Some(cases.to_path_buf()),
        _ => None,
    };
    let donor_set = donor_path
        .as_ref()
        .map(|path| testgen::load(path))
        .transpose()?;
    if let Some(donor_set) = &donor_set {
        if donor_set.header.kind != set.header.kind || donor_set.header.mode != set.header.mode {
            bail!(
                "donor set is {}/{} but cases are {}/{}",
                donor_set.header.kind,
                donor_set.header.mode,
                set.header.kind,
                set.header.mode
            );
        }
    }

    let config = RunConfig {
        protocol,
        budget,
        parse_policy,
    };
    let parallelism = parallelism.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let transcripts = run_cases(
        &*built,
        &set.cases,
        &config,
        donor_set.as_ref().map(|d| d.cases.as_slice()),
        parallelism,
    )?;
    transcript::write_to_path(out, &transcripts)?;

    let aborted = transcripts.iter().filter(|t| t.aborted.is_some()).count();
    let solved = transcripts
        .iter()
        .filter(|t| t.termination == Some(seqbench_core::Termination::Solved))
        .count();
    eprintln!(
        "ran {} episodes ({} solved, {} aborted) with {} under {}; transcripts in {}",
        transcripts.len(),
        solved,
        aborted,
        spec.label(),
        protocol,
        out.display()
    );

    if let Some(path) = manifest_path {
        let manifest = RunManifest {
            format_version: MANIFEST_VERSION,
            created_unix: now_unix(),
            kind: set.header.kind,
            mode: set.header.mode,
            protocol,
            parse_policy,
            budget: budget.unwrap_or(set.header.mode.step_budget()),
            agent: spec.label(),
            case_set: cases.display().to_string(),
            case_set_sha256: sha256_file(cases)?,
            case_count: set.cases.len(),
            donor_set: donor_path.as_ref().map(|p| p.display().to_string()),
            donor_set_sha256: donor_path
                .as_ref()
                .map(|p| sha256_file(p))
                .transpose()?,
            transcripts: out.display().to_string(),
            transcripts_sha256: sha256_file(out)?,
        };
        manifest.save(&path)?;
        eprintln!("manifest in {}", path.display());
    }
    Ok(())
}

fn cmd_score(transcripts: &Path, out: Option<PathBuf>, csv: Option<PathBuf>) -> anyhow::Result<()> {
    let episodes = transcript::read_from_path(transcripts)?;
    let scores = score_transcripts(&episodes)?;
    if let Some(csv_path) = csv {
        std::fs::write(&csv_path, episodes_csv(&scores))?;
        eprintln!("per-episode rows in {}", csv_path.display());
    }
    match out {
        Some(path) => {
            scores.save(&path)?;
            eprintln!("scores in {}", path.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&scores)?),
    }
    let s = &scores.summary;
    eprintln!(
        "{}/{} {} with {}: {} episodes, {} solved, acc {:.3}",
        scores.kind, scores.mode, scores.protocol, scores.agent, s.episodes, s.solved, s.acc_mean
    );
    Ok(())
}

fn cmd_report(paths: &[PathBuf], csv: Option<PathBuf>) -> anyhow::Result<()> {
    let scores: Vec<RunScores> = paths
        .iter()
        .map(|p| RunScores::load(p))
        .collect::<anyhow::Result<_>>()?;
    let report = report::build_report(&scores);
    print!("{}", report::render_text(&report));
    if let Some(path) = csv {
        std::fs::write(&path, report::render_csv(&report))?;
        eprintln!("grouped CSV in {}", path.display());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Gen {
            kind,
            mode,
            seed,
            count,
            out,
        } => cmd_gen(&kind, &mode, seed, count, &out),
        Command::Run {
            cases,
            agent,
            endpoint,
            model,
            token_env,
            temperature,
            max_tokens,
            max_retries,
            timeout_secs,
            ice,
            donors,
            teacher_guided,
            parse_policy,
            budget,
            parallelism,
            out,
            manifest,
        } => cmd_run(
            &cases,
            &agent,
            endpoint,
            model,
            token_env,
            temperature,
            max_tokens,
            max_retries,
            timeout_secs,
            ice,
            donors,
            teacher_guided,
            parse_policy.into(),
            budget,
            parallelism,
            &out,
            manifest,
        ),
        Command::Score {
            transcripts,
            out,
            csv,
        } => cmd_score(&transcripts, out, csv),
        Command::Report { scores, csv } => cmd_report(&scores, csv),
        Command::Serve { addr } => service::serve_blocking(&addr),
    }
}
