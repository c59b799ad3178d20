//! Consolidated run report from stage summaries, as JSON or static HTML.

use std::fmt::Write as _;
use std::path::Path;

use ewra_core::metrics::TaskReport;
use ewra_core::TaskKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::summary::{read_all, StageKind, StageSummary};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("reading summaries: {0}")]
    Io(#[from] std::io::Error),
    #[error("run directory lacks summaries for: {}", .0.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "))]
    Missing(Vec<StageKind>),
    #[error("evaluate summary `{key}` has no task report: {message}")]
    BadEvaluation { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub missing_stages: Vec<StageKind>,
    pub stages: Vec<StageSummary>,
    pub evaluations: Vec<TaskReport>,
}

/// Reads every summary under `run_dir`. Without `allow_partial`, each of the
/// five stages must have at least one summary.
pub fn collect(run_dir: &Path, allow_partial: bool) -> Result<RunReport, ReportError> {
    let mut stages = read_all(run_dir)?;
    stages.sort_by(|a, b| (a.stage, &a.key).cmp(&(b.stage, &b.key)));
    let missing: Vec<StageKind> =
        StageKind::ALL.into_iter().filter(|k| !stages.iter().any(|s| s.stage == *k)).collect();
    if !missing.is_empty() && !allow_partial {
        return Err(ReportError::Missing(missing));
    }
    let mut evaluations = Vec::new();
    for s in stages.iter().filter(|s| s.stage == StageKind::Evaluate) {
        let r = s.details.get("report").cloned().unwrap_or_default();
        let r: TaskReport = serde_json::from_value(r)
            .map_err(|e| ReportError::BadEvaluation { key: s.key.clone(), message: e.to_string() })?;
        evaluations.push(r);
    }
    evaluations.sort_by_key(|r| TaskKind::ALL.iter().position(|t| *t == r.task));
    Ok(RunReport { missing_stages: missing, stages, evaluations })
}

pub fn to_json(r: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

pub fn task_title(t: TaskKind) -> &'static str {
    match t {
        TaskKind::Vie => "Vulnerability / Impact / Emergency",
        TaskKind::TopicLabel => "Topic labeling",
        TaskKind::Emotion => "Emotion",
    }
}

fn scalar_details(v: &serde_json::Value) -> String {
    let Some(map) = v.as_object() else { return String::new() };
    map.iter()
        .filter(|(_, v)| v.is_number() || v.is_boolean() || v.is_string())
        .map(|(k, v)| match v {
            serde_json::Value::String(s) => format!("{k}={s}"),
            v => format!("{k}={v}"),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn row(html: &mut String, label: &str, value: &str) {
    let _ = writeln!(html, "<tr><th>{}</th><td>{}</td></tr>", esc(label), esc(value));
}

pub fn to_html(r: &RunReport) -> String {
    let mut h = String::new();
    h.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Run report</title>\n");
    h.push_str(
        "<style>body{font-family:sans-serif;max-width:60rem;margin:2rem auto;padding:0 1rem}\
         table{border-collapse:collapse;margin-bottom:1.5rem}th,td{border:1px solid #ccc;padding:.3rem .6rem;text-align:left}\
         .missing{color:#a00}</style>\n</head>\n<body>\n<h1>Run report</h1>\n",
    );
    if !r.missing_stages.is_empty() {
        let names: Vec<&str> = r.missing_stages.iter().map(|s| s.as_str()).collect();
        let _ = writeln!(h, "<p class=\"missing\">Missing stages: {}</p>", esc(&names.join(", ")));
    }
    h.push_str("<h2>Stages</h2>\n<table>\n<tr><th>stage</th><th>key</th><th>details</th><th>outputs</th></tr>\n");
    for s in &r.stages {
        let mut details = scalar_details(&s.details);
        if let Some(a) = &s.aborted {
            details = format!("{details} (stopped early: {a})");
        }
        let _ = writeln!(
            h,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            esc(s.stage.as_str()),
            esc(&s.key),
            esc(&details),
            esc(&s.outputs.join(" "))
        );
    }
    h.push_str("</table>\n");
    for e in &r.evaluations {
        let _ = writeln!(h, "<section id=\"task-{}\">\n<h2>{}</h2>\n<table>", e.task, esc(task_title(e.task)));
        row(&mut h, "Spearman rank correlation", &e.src_display());
        row(&mut h, "Explanation Jaccard", &format!("{:.4}", e.jaccard_mean));
        if let Some(k) = e.keyword_jaccard_mean {
            row(&mut h, "Keyword Jaccard", &format!("{k:.4}"));
        }
        match (e.similarity_mean, &e.similarity_label) {
            (Some(s), Some(label)) => row(&mut h, label, &format!("{s:.4}")),
            _ => row(&mut h, "Embedding similarity", "unavailable"),
        }
        row(&mut h, "Evaluated", &e.n_evaluated.to_string());
        row(&mut h, "Skipped", &e.n_skipped.to_string());
        row(&mut h, "Degenerate rankings", &format!("{} ({:?})", e.n_degenerate, e.degenerate_policy).to_lowercase());
        h.push_str("</table>\n</section>\n");
    }
    h.push_str("</body>\n</html>\n");
    h
}
