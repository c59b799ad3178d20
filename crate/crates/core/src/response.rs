//! Parsing of `<think>…</think><output>…</output>` responses.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{CategoryDistribution, DistributionError};
use crate::taxonomy::{SubScope, TaskKind, Taxonomy};

/// A parsed model answer: reasoning text plus the final distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationaleOutput {
    pub think_text: String,
    pub distributions: Vec<CategoryDistribution>,
    pub keywords: Option<Vec<String>>,
    pub raw: String,
}

impl RationaleOutput {
    pub fn distribution(&self, scope: SubScope) -> Option<&CategoryDistribution> {
        self.distributions.iter().find(|d| d.scope == scope)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("response has no <{0}> section")]
    MissingSection(&'static str),
    #[error("no parseable probability lines for {0}")]
    NoProbabilities(SubScope),
    #[error("unknown category `{name}` for {scope}")]
    UnknownCategory { scope: SubScope, name: String },
    #[error("unknown category `{0}`")]
    UnknownName(String),
    #[error("category `{0}` listed twice")]
    Duplicate(String),
    #[error("topic response has no Keywords line")]
    MissingKeywords,
}

impl ParseError {
    /// Category errors as opposed to structural format errors.
    pub fn is_category_error(&self) -> bool {
        matches!(self, ParseError::UnknownCategory { .. } | ParseError::UnknownName(_))
    }
}

/// Byte span of the first `<tag>…</tag>`, matched ASCII-case-insensitively.
fn section<'a>(raw: &'a str, lowered: &str, tag: &'static str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = lowered.find(&open)? + open.len();
    let end = lowered[start..].find(&close)? + start;
    Some(&raw[start..end])
}

fn clean_line(line: &str) -> String {
    let stripped: String = line.chars().filter(|c| !matches!(c, '*' | '{' | '}' | '`')).collect();
    let mut s = stripped.trim();
    while let Some(rest) = s.strip_prefix(['-', '•', '–']) {
        s = rest.trim_start();
    }
    s.trim().to_string()
}

fn parse_number(s: &str) -> Option<f64> {
    let t = s.trim().trim_end_matches([',', ';', '.']).trim();
    if t.is_empty() || !t.starts_with(|c: char| c.is_ascii_digit() || c == '.' || c == '-' || c == '+') {
        return None;
    }
    t.parse::<f64>().ok()
}

/// `Name: 0.4` or `Name (0.4)`.
fn parse_item(s: &str) -> Option<(String, f64)> {
    let s = s.trim();
    if let Some(inner) = s.strip_suffix(')') {
        if let Some(open) = inner.rfind('(') {
            let name = inner[..open].trim().trim_end_matches(':').trim();
            if let Some(v) = parse_number(&inner[open + 1..]) {
                if !name.is_empty() {
                    return Some((name.to_string(), v));
                }
            }
        }
    }
    let (name, value) = s.rsplit_once(':')?;
    let v = parse_number(value)?;
    let name = name.trim();
    if name.is_empty() {
        return None;
    }
    Some((name.to_string(), v))
}

fn header<'a>(line: &'a str, names: &[&str]) -> Option<&'a str> {
    let (head, rest) = line.split_once(':')?;
    let key = head.trim().to_ascii_lowercase();
    names.contains(&key.as_str()).then_some(rest)
}

const TOPIC_HEADERS: &[&str] = &["topic", "topics", "main topic"];
const SUBTOPIC_HEADERS: &[&str] = &["sub-topic", "sub-topics", "subtopic", "subtopics", "sub topic", "sub topics"];
const KEYWORD_HEADERS: &[&str] = &["keywords", "keyword", "key words"];

struct Collector<'t> {
    taxonomy: &'t Taxonomy,
    scopes: &'static [SubScope],
    entries: IndexMap<SubScope, IndexMap<String, f64>>,
}

impl Collector<'_> {
    fn add(&mut self, preferred: Option<SubScope>, name: &str, value: f64) -> Result<(), ParseError> {
        let scope = match preferred {
            Some(scope) => {
                if self.taxonomy.resolve(scope, name).is_none() {
                    return Err(ParseError::UnknownCategory { scope, name: name.to_string() });
                }
                scope
            }
            None => *self
                .scopes
                .iter()
                .find(|&&s| self.taxonomy.resolve(s, name).is_some())
                .ok_or_else(|| match self.scopes {
                    [only] => ParseError::UnknownCategory { scope: *only, name: name.to_string() },
                    _ => ParseError::UnknownName(name.to_string()),
                })?,
        };
        let canonical = self.taxonomy.resolve(scope, name).expect("resolved above").to_string();
        let slot = self.entries.entry(scope).or_default();
        if slot.insert(canonical.clone(), value).is_some() {
            return Err(ParseError::Duplicate(canonical));
        }
        Ok(())
    }
}

/// Parses a raw model response for `task`.
///
/// Takes the first `<think>` and first `<output>` spans. Within the output,
/// `- Name: p` lines and `Name (p)` items become entries; for the topic task
/// `Topic:` / `Sub-Topic:` headers select the scope and a `Keywords:` line is
/// split on commas. Absent categories are filled with zero.
pub fn parse_output(raw: &str, task: TaskKind, taxonomy: &Taxonomy) -> Result<RationaleOutput, ParseError> {
    let lowered = raw.to_ascii_lowercase();
    let think = section(raw, &lowered, "think").ok_or(ParseError::MissingSection("think"))?;
    let output = section(raw, &lowered, "output").ok_or(ParseError::MissingSection("output"))?;

    let mut collector = Collector { taxonomy, scopes: task.scopes(), entries: IndexMap::new() };
    let mut current: Option<SubScope> = None;
    let mut keywords: Option<Vec<String>> = None;
    let topic_task = task == TaskKind::TopicLabel;

    for raw_line in output.lines() {
        let line = clean_line(raw_line);
        if line.is_empty() || line.to_ascii_lowercase().starts_with("final output") {
            continue;
        }
        if let Some(rest) = header(&line, KEYWORD_HEADERS) {
            let list: Vec<String> = rest
                .split(',')
                .map(|k| k.trim().trim_end_matches('.').trim().to_string())
                .filter(|k| !k.is_empty())
                .collect();
            keywords.get_or_insert_with(Vec::new).extend(list);
            current = None;
            continue;
        }
        if topic_task {
            let scoped = header(&line, SUBTOPIC_HEADERS)
                .map(|r| (SubScope::Subtopic, r))
                .or_else(|| header(&line, TOPIC_HEADERS).map(|r| (SubScope::Topic, r)));
            if let Some((scope, rest)) = scoped {
                current = Some(scope);
                for piece in rest.split(',') {
                    if let Some((name, v)) = parse_item(piece) {
                        collector.add(Some(scope), &name, v)?;
                    }
                }
                continue;
            }
        }
        let pieces: Vec<&str> = if line.contains('(') { line.split(',').collect() } else { vec![line.as_str()] };
        for piece in pieces {
            if let Some((name, v)) = parse_item(piece) {
                collector.add(current.filter(|_| topic_task), &name, v)?;
            }
        }
    }

    let mut distributions = Vec::new();
    for &scope in task.scopes() {
        let entries = collector.entries.shift_remove(&scope).ok_or(ParseError::NoProbabilities(scope))?;
        let dist = CategoryDistribution::new(scope, entries).completed(taxonomy).map_err(|e| match e {
            DistributionError::UnknownCategory { scope, category } => ParseError::UnknownCategory { scope, name: category },
            DistributionError::Duplicate { category } => ParseError::Duplicate(category),
            other => ParseError::UnknownName(other.to_string()),
        })?;
        distributions.push(dist);
    }
    let keywords = if topic_task { Some(keywords.ok_or(ParseError::MissingKeywords)?) } else { None };
    Ok(RationaleOutput { think_text: think.trim().to_string(), distributions, keywords, raw: raw.to_string() })
}

/// Probability with at most four decimals and no trailing zeros.
pub fn format_probability(p: f64) -> String {
    let r = (p * 10_000.0).round() / 10_000.0;
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

fn inline(dist: &CategoryDistribution) -> String {
    dist.entries
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, &p)| format!("{k} ({})", format_probability(p)))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Canonical `<output>` block in the layout of the one-shot examples.
pub fn render_output_block(out: &RationaleOutput) -> String {
    let mut s = String::from("<output>\nFinal Output:\n");
    match (out.distribution(SubScope::Topic), out.distribution(SubScope::Subtopic)) {
        (Some(topic), Some(sub)) => {
            s.push_str(&format!("- Topic: {}\n", inline(topic)));
            s.push_str(&format!("- Sub-Topic: {}\n", inline(sub)));
            let kw = out.keywords.as_deref().unwrap_or(&[]).join(", ");
            s.push_str(&format!("- Keywords: {kw}\n"));
        }
        _ => {
            for d in &out.distributions {
                for (k, &p) in &d.entries {
                    s.push_str(&format!("- {k}: {}\n", format_probability(p)));
                }
            }
        }
    }
    s.push_str("</output>");
    s
}

pub fn render_think_block(out: &RationaleOutput) -> String {
    format!("<think>\n{}\n</think>", out.think_text)
}
