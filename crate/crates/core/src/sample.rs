//! Alignment samples and their JSON-lines wire format.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::curate::Sentence;
use crate::distribution::CategoryDistribution;
use crate::prompt::PromptVariant;
use crate::response::RationaleOutput;
use crate::taxonomy::{SubScope, TaskKind};

/// Model and decoding settings that produced a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFlag {
    /// At least one distribution was renormalized into the simplex.
    Repaired,
    /// Accepted after one or more failed attempts.
    Retried,
}

/// One (prompt, sentence, rationale) training triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SampleWire", into = "SampleWire")]
pub struct AlignmentSample {
    pub id: String,
    pub task: TaskKind,
    pub variant: PromptVariant,
    pub sentence: Sentence,
    pub prompt: String,
    pub output: RationaleOutput,
    pub generator: GeneratorInfo,
    pub flags: Vec<SampleFlag>,
}

impl AlignmentSample {
    pub fn make_id(sentence: &Sentence, task: TaskKind, variant: PromptVariant) -> String {
        format!("{}-{}-{}", sentence.id(), task, variant)
    }

    pub fn sentence_id(&self) -> String {
        self.sentence.id()
    }
}

#[derive(Serialize, Deserialize)]
struct SampleWire {
    id: String,
    task: TaskKind,
    variant: PromptVariant,
    sentence: Sentence,
    prompt: String,
    think: String,
    distributions: IndexMap<SubScope, IndexMap<String, f64>>,
    keywords: Option<Vec<String>>,
    generator: GeneratorInfo,
    #[serde(default)]
    flags: Vec<SampleFlag>,
}

pub fn distributions_to_map(dists: &[CategoryDistribution]) -> IndexMap<SubScope, IndexMap<String, f64>> {
    dists.iter().map(|d| (d.scope, d.entries.clone())).collect()
}

pub fn distributions_from_map(map: IndexMap<SubScope, IndexMap<String, f64>>) -> Vec<CategoryDistribution> {
    map.into_iter().map(|(scope, entries)| CategoryDistribution::new(scope, entries)).collect()
}

impl From<AlignmentSample> for SampleWire {
    fn from(s: AlignmentSample) -> Self {
        SampleWire {
            id: s.id,
            task: s.task,
            variant: s.variant,
            sentence: s.sentence,
            prompt: s.prompt,
            think: s.output.think_text,
            distributions: distributions_to_map(&s.output.distributions),
            keywords: s.output.keywords,
            generator: s.generator,
            flags: s.flags,
        }
    }
}

impl From<SampleWire> for AlignmentSample {
    fn from(w: SampleWire) -> Self {
        AlignmentSample {
            id: w.id,
            task: w.task,
            variant: w.variant,
            sentence: w.sentence,
            prompt: w.prompt,
            output: RationaleOutput {
                think_text: w.think,
                distributions: distributions_from_map(w.distributions),
                keywords: w.keywords,
                raw: String::new(),
            },
            generator: w.generator,
            flags: w.flags,
        }
    }
}

/// A response that never validated, kept with its last raw text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantineRecord {
    pub sentence: Sentence,
    pub attempts: u32,
    pub raw_last: String,
    pub error: String,
}
