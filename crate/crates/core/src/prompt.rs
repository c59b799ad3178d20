//! One-shot prompt templates for the three tasks, in explicit (with the
//! category-definitions block) and implicit (without it) variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::TaskKind;

pub const PLACEHOLDER: &str = "<sentence>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    Explicit,
    Implicit,
}

impl PromptVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Explicit => "explicit",
            PromptVariant::Implicit => "implicit",
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "explicit" => Ok(PromptVariant::Explicit),
            "implicit" => Ok(PromptVariant::Implicit),
            other => Err(format!("unknown variant `{other}` (expected explicit|implicit)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    TaskDescription,
    Definitions,
    OneShotExample,
    FormatInstructions,
}

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("template must contain `{PLACEHOLDER}` exactly once, found {0}")]
    Placeholder(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub kind: SectionKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub task: TaskKind,
    pub variant: PromptVariant,
    pub sections: Vec<Section>,
}

const VIE_TASK: &str = r#"[Task Description:]
Given the sentence: "<sentence>", determine which categories it belongs to based on the definitions below. Assign a probability score between 0 and 1 to each category (strictly numeric values only), reflecting confidence that the sentence fits each label. Ensure the final probability for all the categories sum is exactly 1."#;

const VIE_DEFINITIONS: &str = r#"[Definitions of Categories]
Vulnerability: Describes conditions that make people or places prone to harm, including:
- Forecasts or warnings for specific locations about hazardous conditions (e.g., storm alerts, flood watches).
- Excludes: General weather forecasts without warnings, past rainfall amounts, or climate trends without immediate hazard warnings.
- Special case: Mentions of inches of rain count only if linked to a forecast predicting danger.

Impact: Describes strictly measurable consequences of extreme weather, such as:
- Number of casualties, injuries, financial loss, infrastructure damage, or economic impact.
- Excludes: Mentions of states of emergency, inches of rain, road closures, tree falling, or event cancellations without quantifiable impact or flight delays.
- Special case: Casualties always count as Impact, even if estimates (e.g., 'dozens injured').

Emergency: Describes urgent actions requiring immediate response, including:
- Evacuations, rescues, emergency shelters, or disaster response efforts.
- Excludes: State of emergency declarations without mention of direct emergency actions.

Others:
- Sentences about extreme weather without clear Vulnerability, Impact, or Emergency markers.
- Sentences mentioning multiple events without enough detail to fit a single category.
- States of emergency, road closures, or school closures without measurable damage or emergency actions."#;

const VIE_EXAMPLE_INPUT: &str = "[Example:]
Input: Krakow is struggling after heavy rainfall, with city officials offering sandbags to protect homes.";

const VIE_EXAMPLE_RESPONSE: &str = r#"<think>
Explanation:
1. Vulnerability: Krakow is struggling after heavy rainfall, indicating the city's vulnerability to flooding. The mention of heavy rainfall implies a risk, suggesting that Krakow is susceptible to potential harm due to the weather conditions. This fits the Vulnerability category as it shows the city’s increased risk of flooding.
2. Impact: While the sentence mentions city officials offering sandbags to protect homes, there is no specific mention of measurable impacts such as casualties, injuries, financial loss, or infrastructure damage. Therefore, this category is less relevant compared to Vulnerability and Emergency.
3. Emergency: The fact that city officials are offering sandbags to protect homes implies an urgent response to a disaster, categorizing the action as an emergency. The immediate need for protective measures points to an emergency situation.
4. Others: This sentence describes a specific event related to heavy rainfall, but it is clearly categorized into Vulnerability, Impact, and Emergency. Therefore, it doesn't fit into the "Others" category as it clearly involves measurable consequences and urgent actions.
</think>
<output>
Final Output:
- Vulnerability: 0.40
- Impact: 0.10
- Emergency: 0.50
- Others: 0.00
</output>"#;

const EMOTION_TASK: &str = r#"[Task Description:]
Given the sentence: "<sentence>", determine which emotions it conveys. Assign probability scores ensuring they sum to exactly 1."#;

const EMOTION_DEFINITIONS: &str = "[Emotion Definitions]
Sadness: Expresses sorrow, grief, disappointment, or loss, often involving suffering or destruction.
Anger: Indicates frustration, outrage, or dissatisfaction, including expressions of blame or criticism.
Fear: Suggests concern, anxiety, or perceived threat, often linked to warnings or potential dangers.
Joy: Reflects happiness, relief, celebration, or positive outcomes.
Optimism: Shows hope, encouragement, or confidence in a positive future.
Trust: Indicates reliability, assurance, or faith in a person, system, or institution.
Neutral: Lacks strong emotional cues, purely factual, informational or descriptive.";

const EMOTION_EXAMPLE_INPUT: &str = r#"[Example:]
Input: "The wildfire destroyed thousands of homes, leaving families devastated.""#;

const EMOTION_EXAMPLE_RESPONSE: &str = "<think>
Explanation:
- The sentence describes destruction and suffering, strongly aligning with Sadness (0.8).
- There is minor frustration in the situation, leading to Anger (0.05).
- The threat aspect contributes to Fear (0.05).
- It lacks positive emotion, optimism, or trust.
- Since the sentence is descriptive but emotionally charged, Neutral (0.1) remains minimal.
</think>

<output>
Final Output:
- Sadness: 0.8
- Anger: 0.05
- Fear: 0.05
- Joy: 0
- Optimism: 0
- Trust: 0
- Neutral: 0.1
</output>";

const TOPIC_TASK: &str = r#"[Task Description:]
Given the sentence: "<sentence>", determine the most relevant topic, subtopic, and keywords based on the definitions below.
Assign a probability score between 0 and 1 to each possible category under Topic and Subtopic (strictly numeric values only), ensuring the final probability sum is exactly 1"#;

const TOPIC_DEFINITIONS: &str = "[Topic and Subtopic Definitions]
Vulnerabilities: Identifies risk factors that make communities more susceptible to damage.
- Environmental Vulnerability: Fragile ecosystems that increase disaster impact.
- Infrastructure Vulnerability: Structural weaknesses leading to heightened risk.
- Economic Vulnerability: Financial instability due to disasters.

Impact: Direct effects of extreme weather.
- Deaths: Fatalities resulting from disasters.
- Infrastructure Damage: Physical destruction of buildings and roads.
- Economic Damage: Financial loss due to extreme weather.
- Homeless: Displacement due to destruction.

Emergency Response: Immediate actions taken to mitigate disasters.
- Evacuation: Organized movement of people to safety.
- Community Support: Aid provided by local and national organizations.
- Emergency Services: Rescue and medical response efforts.
- Communication Strategies: Plans for disseminating critical information.";

const TOPIC_EXAMPLE_INPUT: &str = r#"[Example:]
Input: "Hurricane Maria devastated Puerto Rico, leaving thousands homeless and without power.""#;

const TOPIC_EXAMPLE_RESPONSE: &str = r#"<think>
Explanation:
- The sentence describes significant destruction, categorizing it under Impact (0.8).
- "Leaving thousands homeless" aligns with Homeless (0.5), and "without power" suggests Infrastructure Damage (0.3).
- Emergency efforts likely followed, so Emergency Response (0.2) is relevant, particularly Emergency Services (0.2).
</think>
<output>
Final Output:
- Topic: Impact (0.8), Emergency Response (0.2)
- Sub-Topic: Homeless (0.5), Infrastructure Damage (0.3), Emergency Services (0.2)
- Keywords: devastation, homeless, power outage, Hurricane Maria
</output>"#;

const TOPIC_FORMAT: &str = "- Keywords should not include specific locations.";

/// The response half of a task's built-in one-shot example.
pub fn one_shot_response(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Vie => VIE_EXAMPLE_RESPONSE,
        TaskKind::Emotion => EMOTION_EXAMPLE_RESPONSE,
        TaskKind::TopicLabel => TOPIC_EXAMPLE_RESPONSE,
    }
}

impl PromptTemplate {
    pub fn builtin(task: TaskKind, variant: PromptVariant) -> Self {
        let (desc, defs, input, format) = match task {
            TaskKind::Vie => (VIE_TASK, VIE_DEFINITIONS, VIE_EXAMPLE_INPUT, None),
            TaskKind::Emotion => (EMOTION_TASK, EMOTION_DEFINITIONS, EMOTION_EXAMPLE_INPUT, None),
            TaskKind::TopicLabel => (TOPIC_TASK, TOPIC_DEFINITIONS, TOPIC_EXAMPLE_INPUT, Some(TOPIC_FORMAT)),
        };
        let mut sections = vec![Section { kind: SectionKind::TaskDescription, text: desc.to_string() }];
        if variant == PromptVariant::Explicit {
            sections.push(Section { kind: SectionKind::Definitions, text: defs.to_string() });
        }
        sections.push(Section {
            kind: SectionKind::OneShotExample,
            text: format!("{input}\n{}", one_shot_response(task)),
        });
        if let Some(f) = format {
            sections.push(Section { kind: SectionKind::FormatInstructions, text: f.to_string() });
        }
        PromptTemplate { task, variant, sections }
    }

    pub fn has_definitions(&self) -> bool {
        self.sections.iter().any(|s| s.kind == SectionKind::Definitions)
    }

    /// Joins sections with blank lines and substitutes the sentence in a
    /// single pass, so placeholder text inside the sentence stays literal.
    pub fn render(&self, sentence: &str) -> Result<String, TemplateError> {
        let body = self.sections.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("\n\n");
        let count = body.matches(PLACEHOLDER).count();
        if count != 1 {
            return Err(TemplateError::Placeholder(count));
        }
        let (head, tail) = body.split_once(PLACEHOLDER).expect("counted above");
        Ok(format!("{head}{sentence}{tail}"))
    }
}

pub fn render_prompt(task: TaskKind, variant: PromptVariant, sentence: &str) -> Result<String, TemplateError> {
    PromptTemplate::builtin(task, variant).render(sentence)
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: &str = "Heavy rain flooded parts of Krakow on Sunday.";

    #[test]
    fn explicit_vie_contains_definitions() {
        let p = render_prompt(TaskKind::Vie, PromptVariant::Explicit, S).unwrap();
        assert!(p.contains("Definitions of Categories"));
        assert!(p.contains(&format!("Given the sentence: \"{S}\"")));
        assert!(!p.contains(PLACEHOLDER));
    }

    #[test]
    fn implicit_differs_only_by_definitions_block() {
        for task in TaskKind::ALL {
            let e = render_prompt(task, PromptVariant::Explicit, S).unwrap();
            let i = render_prompt(task, PromptVariant::Implicit, S).unwrap();
            let defs = PromptTemplate::builtin(task, PromptVariant::Explicit)
                .sections
                .into_iter()
                .find(|s| s.kind == SectionKind::Definitions)
                .unwrap()
                .text;
            assert_eq!(e.replacen(&format!("{defs}\n\n"), "", 1), i, "{task}");
            assert!(!PromptTemplate::builtin(task, PromptVariant::Implicit).has_definitions());
        }
    }

    #[test]
    fn placeholder_in_sentence_is_literal() {
        let p = render_prompt(TaskKind::Emotion, PromptVariant::Implicit, "say <sentence> twice").unwrap();
        assert_eq!(p.matches(PLACEHOLDER).count(), 1);
        assert!(p.contains("\"say <sentence> twice\""));
    }

    #[test]
    fn missing_placeholder_is_an_error() {
        let mut t = PromptTemplate::builtin(TaskKind::Vie, PromptVariant::Explicit);
        t.sections[0].text = "[Task Description:]".into();
        assert_eq!(t.render(S), Err(TemplateError::Placeholder(0)));
        let mut twice = PromptTemplate::builtin(TaskKind::Vie, PromptVariant::Explicit);
        twice.sections[1].text.push_str(PLACEHOLDER);
        assert_eq!(twice.render(S), Err(TemplateError::Placeholder(2)));
    }

    #[test]
    fn topic_template_ends_with_keyword_rule() {
        let p = render_prompt(TaskKind::TopicLabel, PromptVariant::Explicit, S).unwrap();
        assert!(p.ends_with("- Keywords should not include specific locations."));
    }
}
