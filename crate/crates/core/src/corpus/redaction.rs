//! Deterministic check for numeric A1C values left behind after redaction.
//!
//! A residual is a number in [3.0, 20.0] whose whitespace token lies within
//! eight tokens of a token mentioning "a1c" or "hemoglobin" (case-insensitive;
//! "HbA1c" contains "a1c").

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

const WINDOW: usize = 8;
const RANGE: (f64, f64) = (3.0, 20.0);

static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\S+").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSpan {
    /// Character offset of the first character of the number.
    pub start: usize,
    /// Character offset one past the last character.
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedactionReport {
    pub clean: bool,
    pub residual: Vec<ResidualSpan>,
}

fn is_mention(token: &str) -> bool {
    let lower = token.to_lowercase();
    lower.contains("a1c") || lower.contains("hemoglobin")
}

/// Byte ranges of residual numbers.
fn residual_byte_spans(text: &str) -> Vec<(usize, usize)> {
    let tokens: Vec<_> = TOKEN.find_iter(text).collect();
    let mentions: Vec<usize> =
        tokens.iter().enumerate().filter(|(_, t)| is_mention(t.as_str())).map(|(i, _)| i).collect();
    if mentions.is_empty() {
        return Vec::new();
    }
    let mut spans = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        let near = mentions.iter().any(|&m| m.abs_diff(i) <= WINDOW);
        if !near {
            continue;
        }
        for num in NUMBER.find_iter(tok.as_str()) {
            let Ok(value) = num.as_str().parse::<f64>() else { continue };
            if (RANGE.0..=RANGE.1).contains(&value) {
                spans.push((tok.start() + num.start(), tok.start() + num.end()));
            }
        }
    }
    spans
}

pub fn verify_redaction(text: &str) -> RedactionReport {
    let residual: Vec<ResidualSpan> = residual_byte_spans(text)
        .into_iter()
        .map(|(s, e)| ResidualSpan {
            start: text[..s].chars().count(),
            end: text[..e].chars().count(),
            text: text[s..e].to_string(),
        })
        .collect();
    RedactionReport { clean: residual.is_empty(), residual }
}

/// Replace every residual number with `[REMOVED]`; used by the mock redactor.
pub fn redact_numeric_a1c(text: &str) -> String {
    let spans = residual_byte_spans(text);
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for (s, e) in spans {
        out.push_str(&text[last..s]);
        out.push_str("[REMOVED]");
        last = e;
    }
    out.push_str(&text[last..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn removed_marker_is_clean() {
        assert!(verify_redaction("my A1C was [REMOVED] last month").clean);
    }

    #[test]
    fn residual_value_reported_with_offsets() {
        let r = verify_redaction("my A1C was 7.2");
        assert!(!r.clean);
        assert_eq!(r.residual.len(), 1);
        assert_eq!((r.residual[0].start, r.residual[0].end), (11, 14));
        assert_eq!(r.residual[0].text, "7.2");
    }

    #[test]
    fn unrelated_numbers_are_clean() {
        assert!(verify_redaction("I walk 3.5 miles daily").clean);
        assert!(verify_redaction("").clean);
    }

    #[test]
    fn window_and_range_limits() {
        // nine tokens away
        assert!(verify_redaction("A1C a b c d e f g h 7.0").clean);
        assert!(!verify_redaction("A1C a b c d e f g 7.0").clean);
        assert!(verify_redaction("my a1c was 2.5 or 21").clean);
        assert!(!verify_redaction("hemoglobin result: 6.1%").clean);
        assert!(!verify_redaction("HbA1c=8").clean);
    }

    #[test]
    fn char_offsets_after_multibyte_text() {
        let r = verify_redaction("café — A1C 6.5");
        assert_eq!(r.residual[0].start, 11);
        assert_eq!(r.residual[0].end, 14);
    }

    #[test]
    fn redaction_output_verifies_clean() {
        let text = "My last A1C was 7.2, and hemoglobin A1c 8 before that. We went to the lake on weekends in summer and I walk 3.5 miles.";
        let red = redact_numeric_a1c(text);
        assert_eq!(red, "My last A1C was [REMOVED], and hemoglobin A1c [REMOVED] before that. We went to the lake on weekends in summer and I walk 3.5 miles.");
        assert!(verify_redaction(&red).clean);
    }

    proptest! {
        #[test]
        fn redact_then_verify_is_clean(text in "[ a-zA-Z0-9.,%]{0,120}") {
            prop_assert!(verify_redaction(&redact_numeric_a1c(&text)).clean);
        }
    }
}
