//! Report tables: group score files by (kind, mode, protocol, agent) and
//! print each group's set-level metrics. When a group appears in several
//! score files (repeated runs), the table shows the mean with distances to
//! the observed extremes as `avg (-below/+above)`.

use std::collections::BTreeMap;

use seqbench_core::metrics::{aggregate, Summary};

use crate::score::RunScores;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupKey {
    pub kind: String,
    pub mode: String,
    pub protocol: String,
    pub agent: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub key: GroupKey,
    pub runs: usize,
    pub episodes: usize,
    pub aborted: usize,
    pub err_min: Option<Summary>,
    pub err_sum: Option<Summary>,
    pub g_min: Option<Summary>,
    pub g_sum: Option<Summary>,
    pub acc: Summary,
    pub psacc_avg: Option<Summary>,
}

fn summarize(values: Vec<f64>) -> Option<Summary> {
    if values.is_empty() {
        None
    } else {
        aggregate(&values).ok()
    }
}

/// Collapse score files into one report row per group, sorted by key.
pub fn build_report(scores: &[RunScores]) -> Vec<GroupReport> {
    let mut groups: BTreeMap<GroupKey, Vec<&RunScores>> = BTreeMap::new();
    for s in scores {
        let key = GroupKey {
            kind: s.kind.to_string(),
            mode: s.mode.to_string(),
            protocol: s.protocol.to_string(),
            agent: s.agent.clone(),
        };
        groups.entry(key).or_default().push(s);
    }
    groups
        .into_iter()
        .map(|(key, runs)| {
            let pick = |f: fn(&RunScores) -> Option<f64>| -> Option<Summary> {
                summarize(runs.iter().filter_map(|r| f(r)).collect())
            };
            GroupReport {
                key,
                runs: runs.len(),
                episodes: runs.iter().map(|r| r.summary.episodes).sum(),
                aborted: runs.iter().map(|r| r.summary.aborted).sum(),
                err_min: pick(|r| r.summary.err_min_mean),
                err_sum: pick(|r| r.summary.err_sum_mean),
                g_min: pick(|r| r.summary.g_min_mean),
                g_sum: pick(|r| r.summary.g_sum_mean),
                acc: summarize(runs.iter().map(|r| r.summary.acc_mean).collect())
                    .expect("group is non-empty"),
                psacc_avg: pick(|r| r.summary.psacc_avg),
            }
        })
        .collect()
}

fn cell(summary: Option<&Summary>, repeated: bool) -> String {
    match summary {
        None => "-".into(),
        Some(s) if repeated => format!(
            "{:.3} (-{:.3}/+{:.3})",
            s.avg, s.margin_min, s.margin_max
        ),
        Some(s) => format!("{:.3}", s.avg),
    }
}

/// Fixed-width text table.
pub fn render_text(report: &[GroupReport]) -> String {
    let header = [
        "kind", "mode", "protocol", "agent", "runs", "episodes", "Err_min", "Err_sum", "G_min",
        "G_sum", "ACC", "PSACC_avg",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for g in report {
        let repeated = g.runs > 1;
        rows.push(vec![
            g.key.kind.clone(),
            g.key.mode.clone(),
            g.key.protocol.clone(),
            g.key.agent.clone(),
            g.runs.to_string(),
            g.episodes.to_string(),
            cell(g.err_min.as_ref(), repeated),
            cell(g.err_sum.as_ref(), repeated),
            cell(g.g_min.as_ref(), repeated),
            cell(g.g_sum.as_ref(), repeated),
            cell(Some(&g.acc), repeated),
            cell(g.psacc_avg.as_ref(), repeated),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (index, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, width)| format!("{cell:<width$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if index == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

fn csv_summary(summary: Option<&Summary>) -> String {
    match summary {
        None => ",,".into(),
        Some(s) => format!("{:.6},{:.6},{:.6}", s.avg, s.margin_min, s.margin_max),
    }
}

/// Machine-readable grouped report with explicit margin columns.
pub fn render_csv(report: &[GroupReport]) -> String {
    let mut out = String::from(
        "kind,mode,protocol,agent,runs,episodes,aborted,\
         err_min_avg,err_min_margin_min,err_min_margin_max,\
         err_sum_avg,err_sum_margin_min,err_sum_margin_max,\
         g_min_avg,g_min_margin_min,g_min_margin_max,\
         g_sum_avg,g_sum_margin_min,g_sum_margin_max,\
         acc_avg,acc_margin_min,acc_margin_max,\
         psacc_avg,psacc_margin_min,psacc_margin_max\n",
    );
    for g in report {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            g.key.kind,
            g.key.mode,
            g.key.protocol,
            g.key.agent,
            g.runs,
            g.episodes,
            g.aborted,
            csv_summary(g.err_min.as_ref()),
            csv_summary(g.err_sum.as_ref()),
            csv_summary(g.g_min.as_ref()),
            csv_summary(g.g_sum.as_ref()),
            csv_summary(Some(&g.acc)),
            csv_summary(g.psacc_avg.as_ref()),
        ));
    }
    out
}
