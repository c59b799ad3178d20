//! Dataset splitting, training-regime construction and curriculum plans.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{write_jsonl, JsonlError};
use crate::prompt::PromptVariant;
use crate::response::{render_output_block, render_think_block};
use crate::sample::AlignmentSample;
use crate::taxonomy::TaskKind;

pub const DEFAULT_SEED: u64 = 3407;

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("invalid split: {0}")]
    Split(String),
    #[error("{regime} needs {needed} samples; offending ids: {}", ids.join(", "))]
    MissingVariant { regime: RegimeKind, needed: String, ids: Vec<String> },
    #[error(transparent)]
    Io(#[from] JsonlError),
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_frac: 0.70, val_frac: 0.15, test_frac: 0.15, seed: DEFAULT_SEED }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CurriculumError> {
        let fr = [self.train_frac, self.val_frac, self.test_frac];
        if fr.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(CurriculumError::Split("fractions must be positive".into()));
        }
        let sum: f64 = fr.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CurriculumError::Split(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

fn floor_count(n: usize, frac: f64) -> usize {
    (n as f64 * frac + 1e-9).floor() as usize
}

/// Seeded split over groups of items sharing a key, so all samples of one
/// sentence land in the same partition. Validation and test receive
/// ⌊groups·f⌋ groups each; the remainder goes to train. Items keep their
/// input order within each partition.
pub fn split_by<T, K, F>(items: Vec<T>, key: F, spec: &SplitSpec) -> Result<Splits<T>, CurriculumError>
where
    K: Eq + std::hash::Hash + Clone,
    F: Fn(&T) -> K,
{
    spec.validate()?;
    let mut group_of: HashMap<K, usize> = HashMap::new();
    let mut item_group = Vec::with_capacity(items.len());
    for item in &items {
        let k = key(item);
        let next = group_of.len();
        item_group.push(*group_of.entry(k).or_insert(next));
    }
    let n_groups = group_of.len();
    let mut order: Vec<usize> = (0..n_groups).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let n_val = floor_count(n_groups, spec.val_frac);
    let n_test = floor_count(n_groups, spec.test_frac);
    let n_train = n_groups - n_val - n_test;
    // 0 = train, 1 = val, 2 = test
    let mut partition = vec![0u8; n_groups];
    for (pos, &g) in order.iter().enumerate() {
        partition[g] = if pos < n_train {
            0
        } else if pos < n_train + n_val {
            1
        } else {
            2
        };
    }
    let mut out = Splits { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (item, g) in items.into_iter().zip(item_group) {
        match partition[g] {
            0 => out.train.push(item),
            1 => out.val.push(item),
            _ => out.test.push(item),
        }
    }
    Ok(out)
}

pub fn split(samples: Vec<AlignmentSample>, spec: &SplitSpec) -> Result<Splits<AlignmentSample>, CurriculumError> {
    split_by(samples, |s| s.sentence_id(), spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    #[serde(rename = "direct")]
    DirectSft,
    #[serde(rename = "reason-implicit")]
    ReasonImplicit,
    #[serde(rename = "reason-explicit")]
    ReasonExplicit,
    #[serde(rename = "ewra")]
    Ewra,
    #[serde(rename = "reverse-ewra")]
    ReverseEwra,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 5] = [
        RegimeKind::DirectSft,
        RegimeKind::ReasonImplicit,
        RegimeKind::ReasonExplicit,
        RegimeKind::Ewra,
        RegimeKind::ReverseEwra,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::DirectSft => "direct",
            RegimeKind::ReasonImplicit => "reason-implicit",
            RegimeKind::ReasonExplicit => "reason-explicit",
            RegimeKind::Ewra => "ewra",
            RegimeKind::ReverseEwra => "reverse-ewra",
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RegimeKind::ALL
            .into_iter()
            .find(|r| r.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown regime `{s}` (expected direct|reason-implicit|reason-explicit|ewra|reverse-ewra)"))
    }
}

/// One supervised fine-tuning record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub instruction: String,
    pub input: String,
    #[serde(rename = "output")]
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegimeData {
    Single(Vec<TrainingRecord>),
    Staged { implicit: Vec<TrainingRecord>, explicit: Vec<TrainingRecord> },
}

fn record(sample: &AlignmentSample, with_reasoning: bool) -> TrainingRecord {
    let output = render_output_block(&sample.output);
    let target = if with_reasoning { format!("{}\n{output}", render_think_block(&sample.output)) } else { output };
    TrainingRecord { instruction: sample.prompt.clone(), input: sample.sentence.text.clone(), target }
}

fn of_variant(
    samples: &[AlignmentSample],
    variant: PromptVariant,
    kind: RegimeKind,
) -> Result<Vec<&AlignmentSample>, CurriculumError> {
    let chosen: Vec<&AlignmentSample> = samples.iter().filter(|s| s.variant == variant).collect();
    if chosen.is_empty() && !samples.is_empty() {
        return Err(CurriculumError::MissingVariant {
            regime: kind,
            needed: variant.to_string(),
            ids: samples.iter().map(|s| s.id.clone()).collect(),
        });
    }
    Ok(chosen)
}

/// Builds the training records of a regime.
///
/// Direct-SFT uses explicit samples with targets reduced to the `<output>`
/// block; the reasoning regimes keep `<think>` and pick the variant whose
/// instruction matches; EWRA and its reverse require every (sentence, task)
/// to be present in both variants.
pub fn build_regime(samples: &[AlignmentSample], kind: RegimeKind) -> Result<RegimeData, CurriculumError> {
    match kind {
        RegimeKind::DirectSft => Ok(RegimeData::Single(
            of_variant(samples, PromptVariant::Explicit, kind)?.into_iter().map(|s| record(s, false)).collect(),
        )),
        RegimeKind::ReasonImplicit => Ok(RegimeData::Single(
            of_variant(samples, PromptVariant::Implicit, kind)?.into_iter().map(|s| record(s, true)).collect(),
        )),
        RegimeKind::ReasonExplicit => Ok(RegimeData::Single(
            of_variant(samples, PromptVariant::Explicit, kind)?.into_iter().map(|s| record(s, true)).collect(),
        )),
        RegimeKind::Ewra | RegimeKind::ReverseEwra => {
            let key = |s: &AlignmentSample| (s.sentence_id(), s.task);
            let keys = |v: PromptVariant| -> HashSet<(String, TaskKind)> {
                samples.iter().filter(|s| s.variant == v).map(key).collect()
            };
            let (imp_keys, exp_keys) = (keys(PromptVariant::Implicit), keys(PromptVariant::Explicit));
            let orphans: Vec<String> = samples
                .iter()
                .filter(|s| {
                    let other = match s.variant {
                        PromptVariant::Implicit => &exp_keys,
                        PromptVariant::Explicit => &imp_keys,
                    };
                    !other.contains(&key(s))
                })
                .map(|s| s.id.clone())
                .collect();
            if !orphans.is_empty() {
                return Err(CurriculumError::MissingVariant {
                    regime: kind,
                    needed: "paired explicit and implicit".into(),
                    ids: orphans,
                });
            }
            let pick = |v: PromptVariant| samples.iter().filter(|s| s.variant == v).map(|s| record(s, true)).collect();
            Ok(RegimeData::Staged { implicit: pick(PromptVariant::Implicit), explicit: pick(PromptVariant::Explicit) })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub lora_rank: u32,
    pub lora_alpha: u32,
    pub effective_batch: u32,
    pub qk_only: bool,
    pub seed: u64,
    pub max_seq_len: u32,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            learning_rate: 2e-4,
            lora_rank: 16,
            lora_alpha: 16,
            effective_batch: 64,
            qk_only: true,
            seed: DEFAULT_SEED,
            max_seq_len: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// Dataset path relative to the plan file.
    pub path: String,
    pub epochs: u32,
    pub label: String,
}

/// Ordered training stages consumed by the trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumPlan {
    pub regime: RegimeKind,
    pub stages: Vec<Stage>,
    pub hyperparameters: Hyperparameters,
    /// Whether optimizer state is discarded between stages.
    #[serde(default)]
    pub reset_optimizer: bool,
}

impl CurriculumPlan {
    pub fn total_epochs(&self) -> u32 {
        self.stages.iter().map(|s| s.epochs).sum()
    }
}

fn stage(label: &str, epochs: u32) -> Stage {
    Stage { path: format!("{label}.jsonl"), epochs, label: label.to_string() }
}

/// Stage layout per regime; every regime sees two epochs in total.
pub fn plan_for(kind: RegimeKind, hyperparameters: Hyperparameters) -> CurriculumPlan {
    let stages = match kind {
        RegimeKind::DirectSft => vec![stage("direct", 2)],
        RegimeKind::ReasonImplicit => vec![stage("implicit", 2)],
        RegimeKind::ReasonExplicit => vec![stage("explicit", 2)],
        RegimeKind::Ewra => vec![stage("implicit", 1), stage("explicit", 1)],
        RegimeKind::ReverseEwra => vec![stage("explicit", 1), stage("implicit", 1)],
    };
    CurriculumPlan { regime: kind, stages, hyperparameters, reset_optimizer: false }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedPlan {
    pub plan: CurriculumPlan,
    pub plan_path: PathBuf,
    pub record_counts: Vec<(String, usize)>,
}

/// Writes stage JSON-lines files and `plan.json` into `dir`.
pub fn emit_plan(
    kind: RegimeKind,
    data: &RegimeData,
    hyperparameters: Hyperparameters,
    dir: &Path,
) -> Result<EmittedPlan, CurriculumError> {
    let plan = plan_for(kind, hyperparameters);
    let mut counts = Vec::new();
    for st in &plan.stages {
        let records: &[TrainingRecord] = match (data, st.label.as_str()) {
            (RegimeData::Single(r), _) => r,
            (RegimeData::Staged { implicit, .. }, "implicit") => implicit,
            (RegimeData::Staged { explicit, .. }, _) => explicit,
        };
        write_jsonl(&dir.join(&st.path), records)?;
        counts.push((st.label.clone(), records.len()));
    }
    let plan_path = dir.join("plan.json");
    let mut text = serde_json::to_string_pretty(&plan).expect("plan serializes");
    text.push('\n');
    std::fs::write(&plan_path, text).map_err(|source| CurriculumError::Write { path: plan_path.clone(), source })?;
    Ok(EmittedPlan { plan, plan_path, record_counts: counts })
}
