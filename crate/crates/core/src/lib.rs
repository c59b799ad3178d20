//! Pure building blocks for the extreme-weather reasoning-alignment pipeline.
//!
//! Everything in this crate is free of I/O except the small file helpers in
//! [`curate::Gazetteer::load`], [`curriculum::emit_plan`] and the
//! [`jsonl`] module, so it also compiles to `wasm32-unknown-unknown`.
//!
//! Stage order mirrors the pipeline:
//!
//! 1. [`ingest`] builds feed queries, parses RSS, windows and dedupes articles.
//! 2. [`curate`] segments articles into sentences and keeps located ones.
//! 3. [`prompt`] and [`response`] render one-shot prompts and parse the
//!    `<think>`/`<output>` answers into [`distribution::CategoryDistribution`]s.
//! 4. [`curriculum`] splits samples and emits training regimes and plans.
//! 5. [`metrics`] scores predictions against a gold set.

pub mod curate;
pub mod curriculum;
pub mod distribution;
pub mod event;
pub mod ingest;
pub mod jsonl;
pub mod metrics;
pub mod prompt;
pub mod response;
pub mod sample;
pub mod taxonomy;

pub use distribution::{CategoryDistribution, ValidationVerdict};
pub use event::{Event, EventType};
pub use taxonomy::{SubScope, TaskKind, Taxonomy};
