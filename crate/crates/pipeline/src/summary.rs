//! Per-stage run summaries written under `<out>/summaries/`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const SUMMARY_DIR: &str = "summaries";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    Ingest,
    Curate,
    GenAlign,
    BuildCurriculum,
    Evaluate,
}

impl StageKind {
    pub const ALL: [StageKind; 5] =
        [StageKind::Ingest, StageKind::Curate, StageKind::GenAlign, StageKind::BuildCurriculum, StageKind::Evaluate];

    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::Ingest => "ingest",
            StageKind::Curate => "curate",
            StageKind::GenAlign => "gen-align",
            StageKind::BuildCurriculum => "build-curriculum",
            StageKind::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StageKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        StageKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// What one subcommand invocation did. Paths are relative to the run dir.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: StageKind,
    /// Event id, `task-variant`, regime or task, depending on the stage.
    pub key: String,
    pub outputs: Vec<String>,
    pub details: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl StageSummary {
    pub fn file_name(&self) -> String {
        format!("{}-{}.json", self.stage, self.key)
    }

    pub fn write(&self, run_dir: &Path) -> std::io::Result<PathBuf> {
        let dir = run_dir.join(SUMMARY_DIR);
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(self.file_name());
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Path of `p` relative to `base` when it lies inside, else `p` itself.
pub fn relative(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

pub fn read_all(run_dir: &Path) -> std::io::Result<Vec<StageSummary>> {
    let dir = run_dir.join(SUMMARY_DIR);
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        let s: StageSummary = serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", p.display())))?;
        out.push(s);
    }
    Ok(out)
}
