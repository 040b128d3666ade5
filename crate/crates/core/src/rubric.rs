//! The five-topic × three-subtopic SDOH taxonomy and its 1–5 rating scales.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const CANONICAL_TOML: &str = include_str!("../data/rubric.toml");

/// Topics and subtopics in their canonical order.
pub const TAXONOMY: [(&str, [&str; 3]); 5] = [
    ("Socioeconomic Status", ["Income Level", "Housing", "Financial Stress"]),
    ("Diet", ["Diet Type", "Food Preferences", "Dietary Restrictions"]),
    ("Social Support", ["Family Support", "Friends", "Social Networks"]),
    (
        "Health Services",
        ["Healthcare Utilization", "Satisfaction with Services", "Barriers to Care"],
    ),
    (
        "Information on Diabetes Management",
        ["Knowledge Level", "Self-Care Practices", "Medication Adherence"],
    ),
];

/// Separator between topic and subtopic in labels and feature column names.
pub const LABEL_SEPARATOR: &str = " - ";

pub fn subtopic_label(topic: &str, subtopic: &str) -> String {
    format!("{topic}{LABEL_SEPARATOR}{subtopic}")
}

/// Canonical "Topic - Subtopic" labels in taxonomy order.
pub fn canonical_labels() -> Vec<String> {
    TAXONOMY
        .iter()
        .flat_map(|(topic, subs)| subs.iter().map(move |s| subtopic_label(topic, s)))
        .collect()
}

#[derive(Debug, Error)]
pub enum RubricError {
    #[error("rubric config is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("rubric must define exactly the 15 canonical subtopics; missing: {missing:?}, unexpected: {unexpected:?}")]
    Taxonomy { missing: Vec<String>, unexpected: Vec<String> },
    #[error("subtopic {0} has an empty keyword list")]
    NoKeywords(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rubric {
    pub topic: String,
    pub subtopic: String,
    pub keywords: Vec<String>,
    /// Descriptions for levels 1 through 5.
    pub levels: [String; 5],
    #[serde(skip)]
    pub not_present: String,
}

impl Rubric {
    pub fn label(&self) -> String {
        subtopic_label(&self.topic, &self.subtopic)
    }

    /// Scale block substituted into the rating prompt.
    pub fn scale_text(&self) -> String {
        let mut out = String::new();
        for (i, level) in self.levels.iter().enumerate() {
            out.push_str(&format!("\n- {}: {}", i + 1, level));
        }
        out.push_str(&format!("\n- -1: {}", self.not_present));
        out
    }

    /// Retrieval query: label followed by the keyword list.
    pub fn query(&self) -> String {
        format!("{} {}", self.label(), self.keywords.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricSet {
    pub subtopics: Vec<Rubric>,
}

#[derive(Deserialize)]
struct RubricFile {
    not_present: String,
    subtopic: Vec<Rubric>,
}

impl RubricSet {
    /// The built-in rubric.
    pub fn canonical() -> Self {
        Self::from_toml_str(CANONICAL_TOML).expect("built-in rubric is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, RubricError> {
        let file: RubricFile = toml::from_str(text)?;
        let mut subtopics = file.subtopic;
        for r in &mut subtopics {
            r.not_present = file.not_present.clone();
            if r.keywords.is_empty() {
                return Err(RubricError::NoKeywords(r.label()));
            }
        }
        let expected = canonical_labels();
        let got: Vec<String> = subtopics.iter().map(Rubric::label).collect();
        let missing: Vec<String> = expected.iter().filter(|l| !got.contains(l)).cloned().collect();
        let mut unexpected: Vec<String> = got.iter().filter(|l| !expected.contains(l)).cloned().collect();
        // duplicates count as unexpected
        for (i, l) in got.iter().enumerate() {
            if got[..i].contains(l) && !unexpected.contains(l) {
                unexpected.push(l.clone());
            }
        }
        if !missing.is_empty() || !unexpected.is_empty() {
            return Err(RubricError::Taxonomy { missing, unexpected });
        }
        // keep canonical order regardless of file order
        subtopics.sort_by_key(|r| expected.iter().position(|l| *l == r.label()));
        Ok(Self { subtopics })
    }

    pub fn get(&self, label: &str) -> Option<&Rubric> {
        self.subtopics.iter().find(|r| r.label() == label)
    }

    pub fn labels(&self) -> Vec<String> {
        self.subtopics.iter().map(Rubric::label).collect()
    }

    pub fn len(&self) -> usize {
        self.subtopics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtopics.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_rubric_has_fifteen_subtopics_in_order() {
        let set = RubricSet::canonical();
        assert_eq!(set.len(), 15);
        assert_eq!(set.labels(), canonical_labels());
        assert_eq!(set.subtopics[0].label(), "Socioeconomic Status - Income Level");
    }

    #[test]
    fn scale_text_lists_levels_and_sentinel() {
        let set = RubricSet::canonical();
        let text = set.get("Social Support - Social Networks").unwrap().scale_text();
        assert!(text.contains("- 4: Active in community or group settings regularly."));
        assert!(text.ends_with("- -1: Not mentioned or irrelevant in the interview."));
    }

    #[test]
    fn rejects_incomplete_taxonomy() {
        let text = r#"
not_present = "n/a"
[[subtopic]]
topic = "Diet"
subtopic = "Diet Type"
keywords = ["Diet"]
levels = ["a", "b", "c", "d", "e"]
"#;
        match RubricSet::from_toml_str(text) {
            Err(RubricError::Taxonomy { missing, .. }) => assert_eq!(missing.len(), 14),
            other => panic!("unexpected {other:?}"),
        }
    }
}
