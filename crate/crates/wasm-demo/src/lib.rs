//! Browser bindings over the pure parts of `ewra-core`. Every export takes
//! and returns strings; structured results are JSON.

use ewra_core::distribution::{normalize_distribution, ranks_from_distribution, validate_distribution};
use ewra_core::metrics::spearman_from_distributions;
use ewra_core::prompt::{one_shot_response, render_prompt as render, PromptVariant};
use ewra_core::response::parse_output;
use ewra_core::sample::distributions_to_map;
use ewra_core::{CategoryDistribution, SubScope, TaskKind, Taxonomy, ValidationVerdict};
use indexmap::IndexMap;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn scope(s: &str) -> Result<SubScope, String> {
    serde_json::from_value(Value::String(s.trim().to_lowercase())).map_err(|_| format!("unknown scope `{s}`"))
}

fn distribution(scope_name: &str, entries: &str) -> Result<CategoryDistribution, String> {
    let entries: IndexMap<String, f64> =
        serde_json::from_str(entries).map_err(|e| format!("expected a JSON object of category: probability ({e})"))?;
    Ok(CategoryDistribution::new(scope(scope_name)?, entries))
}

fn entries_json(d: &CategoryDistribution) -> Value {
    json!(d.entries)
}

pub fn check_distribution_json(scope_name: &str, entries: &str) -> Result<Value, String> {
    let t = Taxonomy::default();
    let d = distribution(scope_name, entries)?;
    let verdict = validate_distribution(&d, &t);
    let (label, detail) = match &verdict {
        ValidationVerdict::Valid => ("valid", Value::Null),
        ValidationVerdict::Repairable { sum } => ("repairable", json!({ "sum": sum })),
        ValidationVerdict::Invalid(reason) => ("invalid", json!(reason.to_string())),
    };
    let mut out = json!({ "verdict": label, "detail": detail, "sum": d.sum() });
    if !matches!(verdict, ValidationVerdict::Invalid(_)) {
        let normalized = normalize_distribution(&d).and_then(|n| n.completed(&t)).map_err(|e| e.to_string())?;
        let ranks = ranks_from_distribution(&normalized);
        out["normalized"] = entries_json(&normalized);
        out["ranks"] = json!(normalized.entries.keys().zip(ranks).collect::<IndexMap<_, _>>());
    }
    Ok(out)
}

pub fn compare_distributions_json(scope_name: &str, pred: &str, gold: &str) -> Result<Value, String> {
    let t = Taxonomy::default();
    let p = distribution(scope_name, pred)?;
    let g = distribution(scope_name, gold)?;
    let c = spearman_from_distributions(&p, &g, &t).map_err(|e| e.to_string())?;
    let (pc, gc) = (p.completed(&t).map_err(|e| e.to_string())?, g.completed(&t).map_err(|e| e.to_string())?);
    Ok(json!({
        "rho": c.rho,
        "degenerate": c.degenerate,
        "categories": pc.entries.keys().collect::<Vec<_>>(),
        "pred_ranks": ranks_from_distribution(&pc),
        "gold_ranks": ranks_from_distribution(&gc),
    }))
}

pub fn parse_response_json(task: &str, raw: &str) -> Result<Value, String> {
    let task: TaskKind = task.parse()?;
    let out = parse_output(raw, task, &Taxonomy::default()).map_err(|e| e.to_string())?;
    Ok(json!({
        "think": out.think_text,
        "distributions": distributions_to_map(&out.distributions),
        "keywords": out.keywords,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// Validates a `{category: probability}` object for `scope`
/// (`vie`, `topic`, `subtopic`, `emotion`); adds the normalized form and
/// average ranks unless invalid.
#[wasm_bindgen]
pub fn check_distribution(scope: &str, entries_json: &str) -> Result<String, JsError> {
    to_js(check_distribution_json(scope, entries_json))
}

/// Spearman correlation between the category rankings of two distributions.
#[wasm_bindgen]
pub fn compare_distributions(scope: &str, pred_json: &str, gold_json: &str) -> Result<String, JsError> {
    to_js(compare_distributions_json(scope, pred_json, gold_json))
}

#[wasm_bindgen]
pub fn render_prompt(task: &str, variant: &str, sentence: &str) -> Result<String, JsError> {
    let task: TaskKind = task.parse().map_err(|e: String| JsError::new(&e))?;
    let variant: PromptVariant = variant.parse().map_err(|e: String| JsError::new(&e))?;
    render(task, variant, sentence).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn parse_response(task: &str, raw: &str) -> Result<String, JsError> {
    to_js(parse_response_json(task, raw))
}

/// The worked example response embedded in each task's prompt.
#[wasm_bindgen]
pub fn example_response(task: &str) -> Result<String, JsError> {
    let task: TaskKind = task.parse().map_err(|e: String| JsError::new(&e))?;
    Ok(one_shot_response(task).to_string())
}
