//! Prompt templates with `{name}` placeholders; `{{` and `}}` are literal braces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    ThemeExtraction,
    FactorSummary,
    SubtopicRating,
    A1cRedaction,
    A1cPrediction,
}

impl TemplateName {
    pub const ALL: [TemplateName; 5] = [
        TemplateName::ThemeExtraction,
        TemplateName::FactorSummary,
        TemplateName::SubtopicRating,
        TemplateName::A1cRedaction,
        TemplateName::A1cPrediction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::ThemeExtraction => "theme_extraction",
            TemplateName::FactorSummary => "factor_summary",
            TemplateName::SubtopicRating => "subtopic_rating",
            TemplateName::A1cRedaction => "a1c_redaction",
            TemplateName::A1cPrediction => "a1c_prediction",
        }
    }
}

impl std::fmt::Display for TemplateName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("missing binding for placeholder {0:?}")]
    MissingBinding(String),
}

const THEME_EXTRACTION: &str = r#"You are an AI assistant specializing in qualitative analysis. Read the following interview transcript with a diabetes patient and identify the main themes and sub-themes discussed. For each theme, provide:
- A concise code (theme) that represents the key concept.
- Up to three relevant direct quotes from the transcript that illustrate the theme.
Provide the output in valid JSON format as a list of objects, where each object has the following structure:
{{
 "code": "Code representing the theme",
 "quotes": ["Quote 1", "Quote 2", "Quote 3"]
}}
Do not include any additional text or explanations outside the JSON.
Interview Transcript:
{interview_text}
Extracted Codes and Quotes:"#;

const FACTOR_SUMMARY: &str = r#"You are an expert analyst extracting key information from an interview with a diabetes patient about their life story. The patients are all older than 50. **Task**: Extract and list only the key pieces of information specifically about "{topic}" from the following interview excerpts.
**Instructions**:
- Provide the information as a bullet-point list.
- Start each bullet point with a standardized format: "- [Keyword][Time Frame]: Detail"
- Use only the following predefined keywords for "{topic}": {keywords}
- Pay close attention to the time frames mentioned, and accurately reflect whether the information is about the past, present, or future.
- Indicate the time frame in each bullet point using [Past], [Present], or [Future].
- Focus exclusively on "{topic}" and exclude any unrelated details.
- If there is no information about "{topic}" in the interview excerpts, respond exactly with "No information available."
- Do not include introductions, explanations, summaries, or conclusions.
- Limit the list to a maximum of 5 bullet points.
**Example**:
- [Exercise][Past]: Used to play basketball in college.
- [Diet][Present]: Currently avoids sweets and limits rice intake.
- [Work Routine][Future]: Plans to retire next year.
**Interview Excerpts**: {context}
**Answer**:"#;

const SUBTOPIC_RATING: &str = r#"Subtopic: {subtopic_label}
Below is the rating scale for this subtopic:{scale_text}
Here is the relevant content from the interview:
{subtopic_text}
TASK:
1) Decide on an integer rating for the subtopic based on the scale above from 1..5, or -1 if not present.
2) Provide a short justification or rationale for why you chose that rating.
3) Then follow these instructions for summarizing and quoting material from the interview:
Provide a concise and specific answer in 3-5 bullet points. Each bullet point must include:
1. A clear summary of the insight or opinion in a single sentence.
2. A full supporting quote from the interviews, written verbatim, with no omissions or ellipses.
Ensure the quote is at least 2-3 sentences long and provides enough context for the reader to understand its meaning fully.
3. If contradictory opinions exist, provide them in a separate bullet point with a full quote.
4. Ensure the entire output adheres to the above criteria.
Formatting: <your summary>
Quote: <verbatim quote>
Return your answer in the following structure:
Rating: <numeric>
Justification: <1-2 sentence reason>
Summary And Quotes: <Bullet points following instructions>"#;

const A1C_REDACTION: &str = r#"Please remove all explicit mentions of A1C levels from the following interview text. Replace any specific A1C numbers or ranges with '[REMOVED]' while preserving the rest of the context and meaning of the sentences. Keep all other diabetes-related information intact.
Interview Content:
{interview_text}
Please return only the modified text without any additional commentary."#;

const A1C_PREDICTION: &str = r#"Based on the following interview content, please:
1. Predict the person's A1C level to .1 accuracy and only use one number, not a range.
2. Do not use mentions of A1C in the text to determine the level of diabetes control.
3. Provide a detailed justification with relevant quotes from the interview
Interview Content:
{interview_text}
Please format your response exactly as follows:
A1C Level: [A1C level prediction]
Justification: [Your detailed analysis]
Supporting Quotes: [At least 2-3 relevant quotes from the interview]"#;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'
}

fn segments(body: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut text = String::new();
    let chars: Vec<char> = body.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '{' if chars.get(i + 1) == Some(&'{') => {
                text.push('{');
                i += 2;
            }
            '}' if chars.get(i + 1) == Some(&'}') => {
                text.push('}');
                i += 2;
            }
            '{' => {
                let mut j = i + 1;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                if j > i + 1 && chars.get(j) == Some(&'}') {
                    if !text.is_empty() {
                        out.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    out.push(Segment::Slot(chars[i + 1..j].iter().collect()));
                    i = j + 1;
                } else {
                    text.push('{');
                    i += 1;
                }
            }
            c => {
                text.push(c);
                i += 1;
            }
        }
    }
    if !text.is_empty() {
        out.push(Segment::Text(text));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: String,
}

impl PromptTemplate {
    pub fn builtin(name: TemplateName) -> Self {
        let body = match name {
            TemplateName::ThemeExtraction => THEME_EXTRACTION,
            TemplateName::FactorSummary => FACTOR_SUMMARY,
            TemplateName::SubtopicRating => SUBTOPIC_RATING,
            TemplateName::A1cRedaction => A1C_REDACTION,
            TemplateName::A1cPrediction => A1C_PREDICTION,
        };
        Self { name, body: body.to_string() }
    }

    /// Placeholder names in first-occurrence order.
    pub fn placeholders(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for seg in segments(&self.body) {
            if let Segment::Slot(n) = seg {
                if !names.contains(&n) {
                    names.push(n);
                }
            }
        }
        names
    }
}

/// Substitutes every placeholder; binding values are inserted verbatim and
/// never re-scanned.
pub fn render_prompt(template: &PromptTemplate, bindings: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.body.len());
    for seg in segments(&template.body) {
        match seg {
            Segment::Text(t) => out.push_str(&t),
            Segment::Slot(name) => {
                let value = bindings.get(&name).ok_or_else(|| TemplateError::MissingBinding(name.clone()))?;
                out.push_str(value);
            }
        }
    }
    Ok(out)
}

/// `{name}` placeholders of `template` still present in `rendered`.
pub fn unfilled_placeholders(template: &PromptTemplate, rendered: &str) -> Vec<String> {
    template.placeholders().into_iter().filter(|p| rendered.contains(&format!("{{{p}}}"))).collect()
}
