//! Task kinds and the category taxonomy shared by prompts, parsing and metrics.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three annotation tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    /// Vulnerability / Impact / Emergency / Others assessment.
    #[serde(rename = "vie")]
    Vie,
    /// Topic + subtopic labeling with keyword extraction.
    #[serde(rename = "topic")]
    TopicLabel,
    #[serde(rename = "emotion")]
    Emotion,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Vie, TaskKind::TopicLabel, TaskKind::Emotion];

    /// Distribution scopes a response for this task must carry, in output order.
    pub fn scopes(self) -> &'static [SubScope] {
        match self {
            TaskKind::Vie => &[SubScope::Vie],
            TaskKind::TopicLabel => &[SubScope::Topic, SubScope::Subtopic],
            TaskKind::Emotion => &[SubScope::Emotion],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Vie => "vie",
            TaskKind::TopicLabel => "topic",
            TaskKind::Emotion => "emotion",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vie" => Ok(TaskKind::Vie),
            "topic" | "topiclabel" | "topic_label" => Ok(TaskKind::TopicLabel),
            "emotion" => Ok(TaskKind::Emotion),
            other => Err(format!("unknown task `{other}` (expected vie|topic|emotion)")),
        }
    }
}

/// Which category list a distribution ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubScope {
    Vie,
    Topic,
    Subtopic,
    Emotion,
}

impl SubScope {
    pub fn task(self) -> TaskKind {
        match self {
            SubScope::Vie => TaskKind::Vie,
            SubScope::Topic | SubScope::Subtopic => TaskKind::TopicLabel,
            SubScope::Emotion => TaskKind::Emotion,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubScope::Vie => "vie",
            SubScope::Topic => "topic",
            SubScope::Subtopic => "subtopic",
            SubScope::Emotion => "emotion",
        }
    }
}

impl fmt::Display for SubScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A topic and its ordered subtopics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicGroup {
    pub topic: String,
    pub subtopics: Vec<String>,
}

/// Per-scope category definitions. Scopes are kept apart because "Impact"
/// names both a VIE category and a topic, with different definitions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Definitions {
    #[serde(default)]
    pub vie: IndexMap<String, String>,
    #[serde(default)]
    pub topic: IndexMap<String, String>,
    #[serde(default)]
    pub subtopic: IndexMap<String, String>,
    #[serde(default)]
    pub emotion: IndexMap<String, String>,
}

impl Definitions {
    pub fn for_scope(&self, scope: SubScope) -> &IndexMap<String, String> {
        match scope {
            SubScope::Vie => &self.vie,
            SubScope::Topic => &self.topic,
            SubScope::Subtopic => &self.subtopic,
            SubScope::Emotion => &self.emotion,
        }
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("reading taxonomy {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing taxonomy: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serializing taxonomy: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid taxonomy: {0}")]
    Invalid(String),
}

/// Category sets for every task plus their definitions.
///
/// Serialized as TOML so deployments can extend it; [`Taxonomy::default`]
/// is the built-in extreme-weather taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub vie_categories: Vec<String>,
    pub topics: Vec<String>,
    pub emotions: Vec<String>,
    pub subtopics: Vec<TopicGroup>,
    /// Alternative spellings accepted when parsing, alias → canonical name.
    #[serde(default)]
    pub aliases: IndexMap<String, String>,
    pub definitions: Definitions,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn defs(items: &[(&str, &str)]) -> IndexMap<String, String> {
    items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

impl Default for Taxonomy {
    fn default() -> Self {
        let subtopics = vec![
            TopicGroup {
                topic: "Vulnerabilities".into(),
                subtopics: strings(&[
                    "Environmental Vulnerability",
                    "Infrastructure Vulnerability",
                    "Economic Vulnerability",
                ]),
            },
            TopicGroup {
                topic: "Impact".into(),
                subtopics: strings(&["Deaths", "Infrastructure Damage", "Economic Damage", "Homeless"]),
            },
            TopicGroup {
                topic: "Emergency Response".into(),
                subtopics: strings(&[
                    "Evacuation",
                    "Community Support",
                    "Emergency Services",
                    "Communication Strategies",
                ]),
            },
        ];
        let definitions = Definitions {
            vie: defs(&[
                ("Vulnerability", "Describes conditions that make people or places prone to harm."),
                ("Impact", "Describes strictly measurable consequences of extreme weather."),
                ("Emergency", "Describes urgent actions requiring immediate response."),
                (
                    "Others",
                    "Sentences about extreme weather without clear Vulnerability, Impact, or Emergency markers.",
                ),
            ]),
            topic: defs(&[
                ("Vulnerabilities", "Alert communities based on their specific vulnerability factors"),
                ("Impact", "Immediate and long-term effects of extreme weather events"),
                (
                    "Emergency Response",
                    "Immediate actions taken by authorities, organizations, and communities",
                ),
            ]),
            subtopic: defs(&[
                (
                    "Environmental Vulnerability",
                    "Areas prone to greater damage due to fragile ecosystems, with location mention",
                ),
                (
                    "Infrastructure Vulnerability",
                    "Structural deficiencies that increase the risk of damage during extreme weather events, with location mention",
                ),
                (
                    "Economic Vulnerability",
                    "The susceptibility of an economy to financial losses due to disasters",
                ),
                ("Deaths", "Fatalities caused by extreme weather events"),
                ("Infrastructure Damage", "Physical harm to buildings, roads, and other critical structures"),
                ("Economic Damage", "Financial losses incurred"),
                ("Homeless", "People displaced due to the destruction"),
                ("Evacuation", "Organized movement of people to safety from threatened areas"),
                (
                    "Community Support",
                    "Assistance provided to affected populations by both local organizations and broader networks",
                ),
                ("Emergency Services", "Immediate rescue and medical aid delivered during a crisis"),
                (
                    "Communication Strategies",
                    "Plans for conveying crucial information to the public and responders during emergencies",
                ),
            ]),
            emotion: defs(&[
                ("Sadness", "Expresses sorrow, grief, disappointment, or loss, often involving suffering or destruction."),
                ("Anger", "Indicates frustration, outrage, or dissatisfaction, including expressions of blame or criticism."),
                ("Fear", "Suggests concern, anxiety, or perceived threat, often linked to warnings or potential dangers."),
                ("Joy", "Reflects happiness, relief, celebration, or positive outcomes."),
                ("Optimism", "Shows hope, encouragement, or confidence in a positive future."),
                ("Trust", "Indicates reliability, assurance, or faith in a person, system, or institution."),
                ("Neutral", "Lacks strong emotional cues, purely factual, informational or descriptive."),
            ]),
        };
        Taxonomy {
            vie_categories: strings(&["Vulnerability", "Impact", "Emergency", "Others"]),
            topics: strings(&["Vulnerabilities", "Impact", "Emergency Response"]),
            emotions: strings(&["Sadness", "Anger", "Fear", "Joy", "Optimism", "Trust", "Neutral"]),
            subtopics,
            aliases: defs(&[
                ("Environmental", "Environmental Vulnerability"),
                ("Infrastructure", "Infrastructure Vulnerability"),
                ("Economic", "Economic Vulnerability"),
                ("Vulnerability", "Vulnerabilities"),
                ("Emergency", "Emergency Response"),
            ]),
            definitions,
        }
    }
}

/// Case-insensitive, whitespace-trimmed comparison key for category names.
pub fn name_key(name: &str) -> String {
    name.trim().to_lowercase()
}

impl Taxonomy {
    /// Ordered category list for a scope. Subtopics are flattened in topic order.
    pub fn categories(&self, scope: SubScope) -> Vec<&str> {
        match scope {
            SubScope::Vie => self.vie_categories.iter().map(String::as_str).collect(),
            SubScope::Topic => self.topics.iter().map(String::as_str).collect(),
            SubScope::Emotion => self.emotions.iter().map(String::as_str).collect(),
            SubScope::Subtopic => self
                .subtopics
                .iter()
                .flat_map(|g| g.subtopics.iter().map(String::as_str))
                .collect(),
        }
    }

    pub fn subtopics_of(&self, topic: &str) -> Option<&[String]> {
        self.subtopics
            .iter()
            .find(|g| name_key(&g.topic) == name_key(topic))
            .map(|g| g.subtopics.as_slice())
    }

    /// Resolves a surface category name to its canonical spelling within `scope`.
    ///
    /// Matching ignores case and surrounding whitespace; aliases are only
    /// honored when their target belongs to the scope.
    pub fn resolve(&self, scope: SubScope, name: &str) -> Option<&str> {
        let key = name_key(name);
        let cats = self.categories(scope);
        if let Some(c) = cats.iter().find(|c| name_key(c) == key) {
            return Some(c);
        }
        let target = self
            .aliases
            .iter()
            .find(|(alias, _)| name_key(alias) == key)
            .map(|(_, canonical)| canonical)?;
        cats.into_iter().find(|c| name_key(c) == name_key(target))
    }

    pub fn definition(&self, scope: SubScope, category: &str) -> Option<&str> {
        self.definitions
            .for_scope(scope)
            .iter()
            .find(|(k, _)| name_key(k) == name_key(category))
            .map(|(_, v)| v.as_str())
    }

    /// Checks structural invariants: nonempty unique categories per scope and
    /// a nonempty definition for each of them.
    pub fn validate(&self) -> Result<(), TaxonomyError> {
        let groups: Vec<&str> = self.subtopics.iter().map(|g| g.topic.as_str()).collect();
        for topic in &self.topics {
            if !groups.iter().any(|g| name_key(g) == name_key(topic)) {
                return Err(TaxonomyError::Invalid(format!("topic `{topic}` has no subtopic group")));
            }
        }
        for scope in [SubScope::Vie, SubScope::Topic, SubScope::Subtopic, SubScope::Emotion] {
            let cats = self.categories(scope);
            if cats.is_empty() {
                return Err(TaxonomyError::Invalid(format!("scope `{scope}` has no categories")));
            }
            let mut seen = std::collections::HashSet::new();
            for c in &cats {
                if c.trim().is_empty() {
                    return Err(TaxonomyError::Invalid(format!("empty category name in `{scope}`")));
                }
                if !seen.insert(name_key(c)) {
                    return Err(TaxonomyError::Invalid(format!("duplicate category `{c}` in `{scope}`")));
                }
                match self.definition(scope, c) {
                    Some(d) if !d.trim().is_empty() => {}
                    _ => {
                        return Err(TaxonomyError::Invalid(format!(
                            "category `{c}` in `{scope}` lacks a definition"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, TaxonomyError> {
        let t: Taxonomy = toml::from_str(s)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_toml_string(&self) -> Result<String, TaxonomyError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}
