//! Alignment-sample generation: render, complete, parse, validate, retry,
//! quarantine.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use ewra_core::curate::Sentence;
use ewra_core::distribution::{normalize_distribution, validate_distribution, ValidationVerdict};
use ewra_core::prompt::{render_prompt, PromptVariant};
use ewra_core::response::{parse_output, RationaleOutput};
use ewra_core::sample::{AlignmentSample, GeneratorInfo, QuarantineRecord, SampleFlag};
use ewra_core::{TaskKind, Taxonomy};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::llm::{ChatClient, Completion, LlmError};

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub in_flight: usize,
    /// Attempts per sentence before quarantine.
    pub max_attempts: u32,
    /// Set externally (e.g. on Ctrl-C) to stop starting new sentences.
    pub cancel: Arc<AtomicBool>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { in_flight: 4, max_attempts: 3, cancel: Arc::new(AtomicBool::new(false)) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateStats {
    pub sentences: usize,
    pub samples: usize,
    pub quarantined: usize,
    pub repaired: usize,
    pub retried: usize,
    /// Sentences never attempted because the run stopped early.
    pub unprocessed: usize,
    pub http_requests: usize,
}

#[derive(Debug)]
pub struct GenerateOutcome {
    pub samples: Vec<AlignmentSample>,
    pub quarantine: Vec<QuarantineRecord>,
    pub stats: GenerateStats,
    /// Why the run stopped early, if it did.
    pub aborted: Option<String>,
}

/// Parses a response and enforces the simplex: repairable distributions are
/// renormalized (second tuple field), invalid ones rejected.
pub fn check_output(raw: &str, task: TaskKind, taxonomy: &Taxonomy) -> Result<(RationaleOutput, bool), String> {
    let mut out = parse_output(raw, task, taxonomy).map_err(|e| e.to_string())?;
    if out.think_text.trim().is_empty() {
        return Err("empty <think> section".into());
    }
    let mut repaired = false;
    for d in &mut out.distributions {
        match validate_distribution(d, taxonomy) {
            ValidationVerdict::Valid => {}
            ValidationVerdict::Repairable { .. } => {
                *d = normalize_distribution(d).map_err(|e| e.to_string())?;
                repaired = true;
            }
            ValidationVerdict::Invalid(reason) => return Err(format!("{} distribution invalid: {reason}", d.scope)),
        }
    }
    Ok((out, repaired))
}

enum Outcome {
    Sample(Box<AlignmentSample>),
    Quarantined(QuarantineRecord),
    Aborted(LlmError),
    Cancelled,
}

fn fatal(e: &LlmError) -> bool {
    match e {
        LlmError::Exhausted { .. } => true,
        LlmError::Endpoint { status, .. } => !matches!(status, 400 | 413 | 422),
        _ => false,
    }
}

struct Ctx<'a> {
    client: &'a ChatClient,
    task: TaskKind,
    variant: PromptVariant,
    taxonomy: &'a Taxonomy,
    opts: &'a GenerateOptions,
    stop: AtomicBool,
    requests: AtomicUsize,
}

impl Ctx<'_> {
    fn generator(&self, attempts: u32, c: Option<&Completion>) -> GeneratorInfo {
        let cfg = self.client.config();
        GeneratorInfo {
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            attempts,
            latency_ms: c.map(|c| c.latency_ms),
            prompt_tokens: c.and_then(|c| c.prompt_tokens),
            completion_tokens: c.and_then(|c| c.completion_tokens),
        }
    }

    async fn one(&self, sentence: &Sentence) -> Outcome {
        let quarantine = |attempts, raw_last: String, error: String| {
            Outcome::Quarantined(QuarantineRecord { sentence: sentence.clone(), attempts, raw_last, error })
        };
        let prompt = match render_prompt(self.task, self.variant, &sentence.text) {
            Ok(p) => p,
            Err(e) => return quarantine(0, String::new(), e.to_string()),
        };
        let (mut raw_last, mut error) = (String::new(), String::new());
        let max = self.opts.max_attempts.max(1);
        for attempt in 1..=max {
            if self.stop.load(Ordering::SeqCst) || self.opts.cancel.load(Ordering::SeqCst) {
                return Outcome::Cancelled;
            }
            let result = self.client.complete(&prompt).await;
            self.requests.fetch_add(
                match &result {
                    Ok(c) => c.attempts as usize,
                    Err(LlmError::Exhausted { attempts, .. }) => *attempts as usize,
                    Err(_) => 1,
                },
                Ordering::SeqCst,
            );
            match result {
                Ok(c) => match check_output(&c.text, self.task, self.taxonomy) {
                    Ok((output, repaired)) => {
                        let mut flags = Vec::new();
                        if repaired {
                            flags.push(SampleFlag::Repaired);
                        }
                        if attempt > 1 {
                            flags.push(SampleFlag::Retried);
                        }
                        return Outcome::Sample(Box::new(AlignmentSample {
                            id: AlignmentSample::make_id(sentence, self.task, self.variant),
                            task: self.task,
                            variant: self.variant,
                            sentence: sentence.clone(),
                            prompt,
                            output,
                            generator: self.generator(attempt, Some(&c)),
                            flags,
                        }));
                    }
                    Err(e) => {
                        tracing::debug!(sentence = %sentence.id(), attempt, error = %e, "rejected response");
                        raw_last = c.text;
                        error = e;
                    }
                },
                Err(e) if fatal(&e) => {
                    self.stop.store(true, Ordering::SeqCst);
                    return Outcome::Aborted(e);
                }
                Err(LlmError::Endpoint { status, body }) => {
                    return quarantine(attempt, body.clone(), format!("endpoint rejected prompt with HTTP {status}"));
                }
                Err(e) => {
                    raw_last.clear();
                    error = e.to_string();
                }
            }
        }
        quarantine(max, raw_last, error)
    }
}

/// Generates one sample per sentence for (`task`, `variant`).
///
/// Samples and quarantine records are disjoint and, unless the run stops
/// early, cover every sentence. Output order follows input order. An
/// endpoint that stays unreachable stops the run; results obtained so far are
/// returned with `aborted` set.
pub async fn generate(
    client: &ChatClient,
    sentences: &[Sentence],
    task: TaskKind,
    variant: PromptVariant,
    taxonomy: &Taxonomy,
    opts: &GenerateOptions,
) -> GenerateOutcome {
    let ctx = Ctx {
        client,
        task,
        variant,
        taxonomy,
        opts,
        stop: AtomicBool::new(false),
        requests: AtomicUsize::new(0),
    };
    let mut results: Vec<(usize, Outcome)> = stream::iter(sentences.iter().enumerate())
        .map(|(i, s)| {
            let ctx = &ctx;
            async move { (i, ctx.one(s).await) }
        })
        .buffer_unordered(opts.in_flight.max(1))
        .collect()
        .await;
    results.sort_by_key(|(i, _)| *i);

    let mut out = GenerateOutcome {
        samples: Vec::new(),
        quarantine: Vec::new(),
        stats: GenerateStats { sentences: sentences.len(), ..Default::default() },
        aborted: None,
    };
    for (_, r) in results {
        match r {
            Outcome::Sample(s) => {
                if s.flags.contains(&SampleFlag::Repaired) {
                    out.stats.repaired += 1;
                }
                if s.flags.contains(&SampleFlag::Retried) {
                    out.stats.retried += 1;
                }
                out.samples.push(*s);
            }
            Outcome::Quarantined(q) => out.quarantine.push(q),
            Outcome::Aborted(e) => {
                out.stats.unprocessed += 1;
                out.aborted.get_or_insert_with(|| e.to_string());
            }
            Outcome::Cancelled => {
                out.stats.unprocessed += 1;
                if out.aborted.is_none() && opts.cancel.load(Ordering::SeqCst) {
                    out.aborted = Some("cancelled".into());
                }
            }
        }
    }
    out.stats.samples = out.samples.len();
    out.stats.quarantined = out.quarantine.len();
    out.stats.http_requests = ctx.requests.load(Ordering::SeqCst);
    out
}
