//! Ranking and overlap metrics: tie-aware Spearman correlation, Jaccard
//! index, and per-task aggregation against a gold set.

use std::collections::{BTreeSet, HashMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{average_ranks_desc, ranks_from_distribution, CategoryDistribution, DistributionError};
use crate::response::{parse_output, RationaleOutput};
use crate::sample::distributions_from_map;
use crate::taxonomy::{SubScope, TaskKind, Taxonomy};

/// Report label for the embedding-based similarity column.
pub const SIMILARITY_LABEL: &str = "embedding cosine similarity (substitute, not BERTScore)";

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("rank vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooShort(usize),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("prediction/gold ids do not align; missing predictions: [{}]; unexpected predictions: [{}]", missing.join(", "), extra.join(", "))]
    IdMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("gold record `{id}`: {reason}")]
    Gold { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    /// Either input had zero variance; `rho` is then defined as 0.
    pub degenerate: bool,
}

/// Spearman's ρ as the Pearson correlation of average ranks.
///
/// Without ties this equals `1 − 6Σd²/(n(n²−1))`.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricError::TooShort(x.len()));
    }
    let rx = average_ranks_desc(x);
    let ry = average_ranks_desc(y);
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation { rho: 0.0, degenerate: true });
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok(Correlation { rho, degenerate: false })
}

/// Spearman's ρ between the category rankings of two distributions of the
/// same scope; absent categories count as probability 0.
pub fn spearman_from_distributions(
    pred: &CategoryDistribution,
    gold: &CategoryDistribution,
    taxonomy: &Taxonomy,
) -> Result<Correlation, MetricError> {
    if pred.scope != gold.scope {
        return Err(DistributionError::ScopeMismatch { left: pred.scope, right: gold.scope }.into());
    }
    let p = pred.completed(taxonomy)?;
    let g = gold.completed(taxonomy)?;
    spearman(&ranks_from_distribution(&p), &ranks_from_distribution(&g))
}

/// Lowercased alphanumeric tokens as a set.
pub fn tokenize_for_overlap(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// |a ∩ b| / |a ∪ b|, with two empty sets scoring 1.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn keyword_tokens(keywords: &[String]) -> BTreeSet<String> {
    keywords.iter().flat_map(|k| tokenize_for_overlap(k)).collect()
}

/// One human-annotated evaluation sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    pub sentence: String,
    pub task: TaskKind,
    pub distributions: IndexMap<SubScope, IndexMap<String, f64>>,
    #[serde(default)]
    pub keywords: Option<Vec<String>>,
    #[serde(default)]
    pub explanation: String,
}

/// A model prediction: either a raw response to parse, or structured fields
/// in the gold-set layout.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributions: Option<IndexMap<SubScope, IndexMap<String, f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

impl PredictionRecord {
    pub fn to_output(&self, task: TaskKind, taxonomy: &Taxonomy) -> Result<RationaleOutput, String> {
        if let Some(raw) = &self.raw {
            return parse_output(raw, task, taxonomy).map_err(|e| e.to_string());
        }
        let map = self.distributions.clone().ok_or("prediction has neither `raw` nor `distributions`")?;
        let mut distributions = Vec::new();
        for d in distributions_from_map(map) {
            distributions.push(d.completed(taxonomy).map_err(|e| e.to_string())?);
        }
        for scope in task.scopes() {
            if !distributions.iter().any(|d| d.scope == *scope) {
                return Err(format!("prediction lacks a {scope} distribution"));
            }
        }
        Ok(RationaleOutput {
            think_text: self.explanation.clone().unwrap_or_default(),
            distributions,
            keywords: self.keywords.clone(),
            raw: String::new(),
        })
    }

    /// Structured prediction mirroring a gold record (useful for self-checks).
    pub fn from_gold(g: &GoldRecord) -> Self {
        PredictionRecord {
            id: g.id.clone(),
            task: Some(g.task),
            raw: None,
            distributions: Some(g.distributions.clone()),
            keywords: g.keywords.clone(),
            explanation: Some(g.explanation.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegeneratePolicy {
    /// Degenerate samples score ρ = 0 and stay in the mean.
    #[default]
    Include,
    /// Degenerate samples are left out of the ρ mean.
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    /// ρ for the primary scope (topic for the topic task).
    pub src: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub src_subtopic: Option<f64>,
    pub degenerate: bool,
    pub jaccard: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword_jaccard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: TaskKind,
    pub src_mean: f64,
    /// (topic, subtopic) means for the topic task.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub src_pair: Option<(f64, f64)>,
    pub jaccard_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword_jaccard_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity_label: Option<String>,
    pub n_evaluated: usize,
    pub n_skipped: usize,
    pub n_degenerate: usize,
    pub degenerate_policy: DegeneratePolicy,
}

impl TaskReport {
    /// ρ as printed in result tables; `topic/subtopic` for the topic task.
    pub fn src_display(&self) -> String {
        match self.src_pair {
            Some((a, b)) => format!("{a:.4}/{b:.4}"),
            None => format!("{:.4}", self.src_mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: TaskReport,
    pub per_sample: Vec<SampleScore>,
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions<'a> {
    pub degenerate_policy: DegeneratePolicy,
    /// Per-id similarity scores from an embedding endpoint, when available.
    pub similarities: Option<&'a HashMap<String, f64>>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn gold_distribution(g: &GoldRecord, scope: SubScope, taxonomy: &Taxonomy) -> Result<CategoryDistribution, MetricError> {
    let entries = g
        .distributions
        .get(&scope)
        .ok_or_else(|| MetricError::Gold { id: g.id.clone(), reason: format!("missing {scope} distribution") })?;
    CategoryDistribution::new(scope, entries.clone())
        .completed(taxonomy)
        .map_err(|e| MetricError::Gold { id: g.id.clone(), reason: e.to_string() })
}

/// Scores predictions against gold records of one task.
///
/// Ids must match one-to-one. Predictions that fail to parse are skipped;
/// degenerate rankings follow `opts.degenerate_policy`. All means are macro
/// averages over per-sample scores.
pub fn evaluate(
    preds: &[PredictionRecord],
    golds: &[GoldRecord],
    task: TaskKind,
    taxonomy: &Taxonomy,
    opts: &EvaluateOptions<'_>,
) -> Result<Evaluation, MetricError> {
    let gold_ids: HashSet<&str> = golds.iter().map(|g| g.id.as_str()).collect();
    let pred_by_id: HashMap<&str, &PredictionRecord> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    let missing: Vec<String> =
        golds.iter().filter(|g| !pred_by_id.contains_key(g.id.as_str())).map(|g| g.id.clone()).collect();
    let mut extra: Vec<String> =
        preds.iter().filter(|p| !gold_ids.contains(p.id.as_str())).map(|p| p.id.clone()).collect();
    if pred_by_id.len() != preds.len() {
        let mut seen = HashSet::new();
        extra.extend(preds.iter().filter(|p| !seen.insert(p.id.as_str())).map(|p| format!("{} (duplicate)", p.id)));
    }
    if !missing.is_empty() || !extra.is_empty() {
        return Err(MetricError::IdMismatch { missing, extra });
    }

    let scopes = task.scopes();
    let mut per_sample = Vec::with_capacity(golds.len());
    let mut src: Vec<Vec<f64>> = vec![Vec::new(); scopes.len()];
    let (mut jac, mut kw_jac, mut sims) = (Vec::new(), Vec::new(), Vec::new());
    let (mut n_skipped, mut n_degenerate) = (0, 0);

    for g in golds {
        let pred = pred_by_id[g.id.as_str()];
        let out = match pred.to_output(task, taxonomy) {
            Ok(o) => o,
            Err(reason) => {
                n_skipped += 1;
                per_sample.push(SampleScore {
                    id: g.id.clone(),
                    src: 0.0,
                    src_subtopic: None,
                    degenerate: false,
                    jaccard: 0.0,
                    keyword_jaccard: None,
                    similarity: None,
                    skipped: Some(reason),
                });
                continue;
            }
        };
        let mut rhos = Vec::with_capacity(scopes.len());
        let mut degenerate = false;
        for (i, &scope) in scopes.iter().enumerate() {
            let gold = gold_distribution(g, scope, taxonomy)?;
            let p = out.distribution(scope).expect("to_output guarantees every scope");
            let c = spearman_from_distributions(p, &gold, taxonomy)?;
            degenerate |= c.degenerate;
            if !(c.degenerate && opts.degenerate_policy == DegeneratePolicy::Exclude) {
                src[i].push(c.rho);
            }
            rhos.push(c.rho);
        }
        if degenerate {
            n_degenerate += 1;
        }
        let j = jaccard(&tokenize_for_overlap(&out.think_text), &tokenize_for_overlap(&g.explanation));
        jac.push(j);
        let kj = (task == TaskKind::TopicLabel).then(|| {
            jaccard(
                &keyword_tokens(out.keywords.as_deref().unwrap_or(&[])),
                &keyword_tokens(g.keywords.as_deref().unwrap_or(&[])),
            )
        });
        if let Some(k) = kj {
            kw_jac.push(k);
        }
        let sim = opts.similarities.and_then(|m| m.get(&g.id).copied());
        if let Some(s) = sim {
            sims.push(s);
        }
        per_sample.push(SampleScore {
            id: g.id.clone(),
            src: rhos[0],
            src_subtopic: rhos.get(1).copied(),
            degenerate,
            jaccard: j,
            keyword_jaccard: kj,
            similarity: sim,
            skipped: None,
        });
    }

    let means: Vec<f64> = src.iter().map(|v| mean(v)).collect();
    let report = TaskReport {
        task,
        src_mean: means[0],
        src_pair: (scopes.len() == 2).then(|| (means[0], means[1])),
        jaccard_mean: mean(&jac),
        keyword_jaccard_mean: (task == TaskKind::TopicLabel).then(|| mean(&kw_jac)),
        similarity_mean: (!sims.is_empty()).then(|| mean(&sims)),
        similarity_label: (!sims.is_empty()).then(|| SIMILARITY_LABEL.to_string()),
        n_evaluated: golds.len() - n_skipped,
        n_skipped,
        n_degenerate,
        degenerate_policy: opts.degenerate_policy,
    };
    Ok(Evaluation { report, per_sample })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vie(p: [f64; 4]) -> CategoryDistribution {
        CategoryDistribution::from_pairs(SubScope::Vie, ["Vulnerability", "Impact", "Emergency", "Others"].into_iter().zip(p))
    }

    #[test]
    fn spearman_examples() {
        let id = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&id, &id).unwrap().rho, 1.0);
        assert_eq!(spearman(&id, &[4.0, 3.0, 2.0, 1.0]).unwrap().rho, -1.0);
        assert!((spearman(&id, &[2.0, 1.0, 4.0, 3.0]).unwrap().rho - 0.6).abs() < 1e-12);
        assert_eq!(spearman(&id, &[1.0, 2.0]), Err(MetricError::LengthMismatch(4, 2)));
        assert_eq!(spearman(&[1.0], &[1.0]), Err(MetricError::TooShort(1)));
        let flat = spearman(&id, &[2.0; 4]).unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.rho, 0.0);
    }

    #[test]
    fn distribution_examples() {
        let t = Taxonomy::default();
        let fig = vie([0.4, 0.1, 0.5, 0.0]);
        assert_eq!(spearman_from_distributions(&fig, &fig, &t).unwrap().rho, 1.0);
        let uniform = spearman_from_distributions(&vie([0.25; 4]), &fig, &t).unwrap();
        assert!(uniform.degenerate && uniform.rho == 0.0);
        // ranks [1,2,3,4] vs [2,3,1,4]: Σd² = 6 → ρ = 1 − 36/60
        let r = spearman_from_distributions(&vie([0.5, 0.3, 0.2, 0.0]), &fig, &t).unwrap();
        assert!((r.rho - 0.4).abs() < 1e-12);
        let emo = CategoryDistribution::from_pairs(SubScope::Emotion, [("Joy", 1.0)]);
        assert!(spearman_from_distributions(&emo, &fig, &t).is_err());
        // missing categories are zeros
        let partial = CategoryDistribution::from_pairs(SubScope::Vie, [("Emergency", 0.5), ("Vulnerability", 0.4), ("Impact", 0.1)]);
        assert_eq!(spearman_from_distributions(&partial, &fig, &t).unwrap().rho, 1.0);
    }

    #[test]
    fn overlap() {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(jaccard(&set(&["flood", "damage", "rescue"]), &set(&["flood", "rescue", "aid"])), 0.5);
        assert_eq!(jaccard(&set(&["a"]), &set(&["a"])), 1.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 1.0);
        assert_eq!(tokenize_for_overlap("Flood damage, flood RESCUE"), set(&["flood", "damage", "rescue"]));
        assert!(tokenize_for_overlap("").is_empty());
        assert_eq!(tokenize_for_overlap("A-B"), set(&["a", "b"]));
    }

    fn gold(id: &str, task: TaskKind, dists: &[(SubScope, &[(&str, f64)])]) -> GoldRecord {
        GoldRecord {
            id: id.into(),
            sentence: "s".into(),
            task,
            distributions: dists
                .iter()
                .map(|(s, e)| (*s, e.iter().map(|(k, v)| (k.to_string(), *v)).collect()))
                .collect(),
            keywords: (task == TaskKind::TopicLabel).then(|| vec!["flood".into(), "power outage".into()]),
            explanation: format!("explanation for {id}"),
        }
    }

    #[test]
    fn evaluate_identity_and_degenerate() {
        let t = Taxonomy::default();
        let golds: Vec<GoldRecord> = (0..10)
            .map(|i| gold(&format!("g{i}"), TaskKind::Vie, &[(SubScope::Vie, &[("Vulnerability", 0.4), ("Impact", 0.1), ("Emergency", 0.5)])]))
            .collect();
        let preds: Vec<PredictionRecord> = golds.iter().map(PredictionRecord::from_gold).collect();
        let ev = evaluate(&preds, &golds, TaskKind::Vie, &t, &EvaluateOptions::default()).unwrap();
        assert_eq!(ev.report.src_mean, 1.0);
        assert_eq!(ev.report.jaccard_mean, 1.0);
        assert_eq!(ev.report.n_evaluated, 10);

        let mut preds = preds;
        preds[3].distributions = Some(
            [(SubScope::Vie, ["Vulnerability", "Impact", "Emergency", "Others"].iter().map(|k| (k.to_string(), 0.25)).collect())]
                .into_iter()
                .collect(),
        );
        let inc = evaluate(&preds, &golds, TaskKind::Vie, &t, &EvaluateOptions::default()).unwrap();
        assert_eq!(inc.report.n_degenerate, 1);
        assert!((inc.report.src_mean - 0.9).abs() < 1e-12);
        let exc = evaluate(
            &preds,
            &golds,
            TaskKind::Vie,
            &t,
            &EvaluateOptions { degenerate_policy: DegeneratePolicy::Exclude, similarities: None },
        )
        .unwrap();
        assert_eq!(exc.report.src_mean, 1.0);
        assert_eq!(exc.report.n_evaluated + exc.report.n_skipped, 10);
        // means are recomputable from the dump
        let recomputed = inc.per_sample.iter().map(|s| s.src).sum::<f64>() / 10.0;
        assert!((recomputed - inc.report.src_mean).abs() < 1e-12);
    }

    #[test]
    fn evaluate_topic_pair_and_errors() {
        let t = Taxonomy::default();
        let g = gold(
            "t1",
            TaskKind::TopicLabel,
            &[
                (SubScope::Topic, &[("Impact", 0.8), ("Emergency Response", 0.2)]),
                (SubScope::Subtopic, &[("Homeless", 0.5), ("Infrastructure Damage", 0.3), ("Emergency Services", 0.2)]),
            ],
        );
        let p = PredictionRecord::from_gold(&g);
        let ev = evaluate(std::slice::from_ref(&p), std::slice::from_ref(&g), TaskKind::TopicLabel, &t, &EvaluateOptions::default()).unwrap();
        assert_eq!(ev.report.src_pair, Some((1.0, 1.0)));
        assert_eq!(ev.report.keyword_jaccard_mean, Some(1.0));
        assert_eq!(ev.report.src_display(), "1.0000/1.0000");

        let stray = PredictionRecord { id: "zzz".into(), ..p.clone() };
        match evaluate(&[stray], std::slice::from_ref(&g), TaskKind::TopicLabel, &t, &EvaluateOptions::default()) {
            Err(MetricError::IdMismatch { missing, extra }) => {
                assert_eq!(missing, ["t1"]);
                assert_eq!(extra, ["zzz"]);
            }
            other => panic!("{other:?}"),
        }
        let garbage = PredictionRecord { id: "t1".into(), raw: Some("no tags".into()), ..Default::default() };
        let ev = evaluate(&[garbage], &[g], TaskKind::TopicLabel, &t, &EvaluateOptions::default()).unwrap();
        assert_eq!((ev.report.n_evaluated, ev.report.n_skipped), (0, 1));
    }
}
