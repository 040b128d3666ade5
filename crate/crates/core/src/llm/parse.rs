//! Parsers for the structured parts of model responses.
//!
//! Every parser is total: any input yields a value, a [`ParseError`], or (for
//! A1C predictions) an explicit non-response. Surrounding prose and code
//! fences are tolerated; typed fields are checked strictly.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const NO_INFORMATION: &str = "No information available.";
pub const MAX_FACTOR_BULLETS: usize = 5;
pub const MAX_THEME_QUOTES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ParseError {
    #[error("no JSON array found in response")]
    NoJsonArray,
    #[error("response has no \"Rating:\" line")]
    MissingRating,
    #[error("rating {0:?} is not an integer")]
    BadRating(String),
    #[error("rating {0} is outside {{-1, 1..5}}")]
    RatingOutOfRange(i64),
}

/// A skipped or truncated piece of a response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    /// 1-based line (bullet parsers) or item index (theme JSON).
    pub at: usize,
    pub message: String,
}

fn issue(at: usize, message: impl Into<String>) -> ParseIssue {
    ParseIssue { at, message: message.into() }
}

// ---------------------------------------------------------------- themes

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeCode {
    pub code: String,
    pub quotes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ThemeParse {
    pub codes: Vec<ThemeCode>,
    pub issues: Vec<ParseIssue>,
}

fn first_json_array(text: &str) -> Option<Vec<Value>> {
    for (i, _) in text.match_indices('[') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Array(items))) = stream.next() {
            return Some(items);
        }
    }
    None
}

pub fn parse_theme_json(response: &str) -> Result<ThemeParse, ParseError> {
    let items = first_json_array(response).ok_or(ParseError::NoJsonArray)?;
    let mut out = ThemeParse::default();
    for (i, item) in items.into_iter().enumerate() {
        let Value::Object(map) = item else {
            out.issues.push(issue(i, "item is not an object"));
            continue;
        };
        let code = match map.get("code") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
            _ => {
                out.issues.push(issue(i, "missing or empty \"code\""));
                continue;
            }
        };
        let mut quotes = Vec::new();
        match map.get("quotes") {
            None | Some(Value::Null) => {}
            Some(Value::Array(qs)) => {
                for q in qs {
                    match q {
                        Value::String(s) if !s.trim().is_empty() => quotes.push(s.clone()),
                        _ => out.issues.push(issue(i, "non-string quote dropped")),
                    }
                }
            }
            Some(_) => out.issues.push(issue(i, "\"quotes\" is not an array")),
        }
        if quotes.len() > MAX_THEME_QUOTES {
            out.issues.push(issue(i, format!("{} quotes truncated to {MAX_THEME_QUOTES}", quotes.len())));
            quotes.truncate(MAX_THEME_QUOTES);
        }
        out.codes.push(ThemeCode { code, quotes });
    }
    Ok(out)
}

// ---------------------------------------------------------------- factor bullets

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Timeframe {
    Past,
    Present,
    Future,
}

impl Timeframe {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "past" => Some(Timeframe::Past),
            "present" => Some(Timeframe::Present),
            "future" => Some(Timeframe::Future),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Timeframe::Past => "Past",
            Timeframe::Present => "Present",
            Timeframe::Future => "Future",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorBullet {
    pub keyword: String,
    pub timeframe: Timeframe,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorBullets {
    NoInformation,
    Items { bullets: Vec<FactorBullet>, issues: Vec<ParseIssue> },
}

static BULLET: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:[-*•]|\d+[.)])\s*\[([^\[\]]+)\]\s*\[([^\[\]]+)\]\s*:\s*(.*\S)\s*$").unwrap()
});

pub fn parse_factor_bullets(response: &str) -> FactorBullets {
    if response.trim() == NO_INFORMATION {
        return FactorBullets::NoInformation;
    }
    let mut bullets = Vec::new();
    let mut issues = Vec::new();
    for (n, line) in response.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some(caps) = BULLET.captures(line) else {
            issues.push(issue(line_no, format!("unparseable line: {}", line.trim())));
            continue;
        };
        let Some(timeframe) = Timeframe::parse(&caps[2]) else {
            issues.push(issue(line_no, format!("unknown time frame {:?}", caps[2].trim())));
            continue;
        };
        if bullets.len() == MAX_FACTOR_BULLETS {
            issues.push(issue(line_no, "bullet beyond the five-bullet limit dropped"));
            continue;
        }
        bullets.push(FactorBullet {
            keyword: caps[1].trim().to_string(),
            timeframe,
            detail: caps[3].trim().to_string(),
        });
    }
    if bullets.is_empty() && issues.is_empty() {
        issues.push(issue(0, "empty response"));
    }
    FactorBullets::Items { bullets, issues }
}

// ---------------------------------------------------------------- rating block

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryQuote {
    pub summary: String,
    pub quote: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingBlock {
    /// −1 (not present) or 1..=5.
    pub rating: i8,
    pub justification: String,
    pub summary_quotes: Vec<SummaryQuote>,
}

impl RatingBlock {
    pub fn quotes(&self) -> Vec<String> {
        self.summary_quotes.iter().filter_map(|sq| sq.quote.clone()).collect()
    }
}

static RATING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^[ \t>*#_-]*rating[ \t*_]*:[ \t*_]*(\S*)").unwrap());
static RATING_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d+(?:\.\d+)?").unwrap());
static JUSTIFICATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^[ \t>*#_-]*justification[ \t*_]*:[ \t*_]*").unwrap());
static SUMMARY_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[ \t>*#_-]*summary\s+and\s+quotes[ \t*_]*:[ \t*_]*").unwrap());
static QUOTE_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:[-*•]\s*)?(?:\[quote\]|\*\*quote\*\*|quote)[ \t*]*:[ \t*]*(.*)$").unwrap()
});
static INLINE_QUOTE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:\[quote\]|\*\*quote\*\*|\bquote)[ \t*]*:[ \t*]*").unwrap());
static LIST_ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:[-*•]|\d+[.)])\s+(.*)$").unwrap());

/// Strips one layer of enclosing double-quote glyphs.
pub fn strip_enclosing_quotes(s: &str) -> String {
    let t = s.trim();
    let t = t.strip_prefix(['"', '“', '”']).unwrap_or(t);
    let t = t.strip_suffix(['"', '”', '“']).unwrap_or(t);
    t.trim().to_string()
}

fn parse_rating_value(token: &str) -> Result<i8, ParseError> {
    let token = token.trim_matches(|c: char| c == '*' || c == '_');
    let Some(m) = RATING_NUMBER.find(token) else {
        return Err(ParseError::BadRating(token.to_string()));
    };
    let num = m.as_str();
    if num.contains('.') {
        return Err(ParseError::BadRating(num.to_string()));
    }
    let value: i64 = num
        .trim_start_matches('+')
        .parse()
        .map_err(|_| ParseError::BadRating(num.to_string()))?;
    match value {
        -1 | 1..=5 => Ok(value as i8),
        other => Err(ParseError::RatingOutOfRange(other)),
    }
}

pub fn parse_rating_block(response: &str) -> Result<RatingBlock, ParseError> {
    let caps = RATING.captures(response).ok_or(ParseError::MissingRating)?;
    let rating = parse_rating_value(caps.get(1).map_or("", |m| m.as_str()))?;
    let after_rating = &response[caps.get(0).unwrap().end()..];
    // skip the rest of the rating line
    let after_rating = after_rating.split_once('\n').map_or("", |(_, rest)| rest);

    let (justification, body) = match JUSTIFICATION.find(after_rating) {
        Some(m) => split_justification(&after_rating[m.end()..]),
        None => (String::new(), after_rating),
    };
    Ok(RatingBlock { rating, justification, summary_quotes: summary_quotes(body) })
}

/// Justification runs until the summary header, a list item or a quote line.
fn split_justification(text: &str) -> (String, &str) {
    let mut end = text.len();
    let mut offset = 0;
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        let line = raw.trim_end_matches(['\n', '\r']);
        if i > 0 && (SUMMARY_HEADER.is_match(line) || LIST_ITEM.is_match(line) || QUOTE_LINE.is_match(line)) {
            end = offset;
            break;
        }
        if i == 0 {
            if let Some(m) = SUMMARY_HEADER.find(line).or_else(|| find_inline_summary(line)) {
                end = m.start();
                break;
            }
        }
        offset += raw.len();
    }
    let justification = text[..end].split_whitespace().collect::<Vec<_>>().join(" ");
    (justification, &text[end..])
}

fn find_inline_summary(line: &str) -> Option<regex::Match<'_>> {
    static INLINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)summary\s+and\s+quotes\s*:").unwrap());
    INLINE.find(line)
}

fn summary_quotes(body: &str) -> Vec<SummaryQuote> {
    let mut items: Vec<SummaryQuote> = Vec::new();
    let mut in_quote = false;
    for raw in body.lines() {
        let line = match SUMMARY_HEADER.find(raw) {
            Some(m) => &raw[m.end()..],
            None => raw,
        };
        if line.trim().is_empty() {
            in_quote = false;
            continue;
        }
        if let Some(c) = QUOTE_LINE.captures(line) {
            let q = c[1].trim().to_string();
            match items.last_mut() {
                Some(last) if last.quote.is_none() => last.quote = Some(q),
                _ => items.push(SummaryQuote { summary: String::new(), quote: Some(q) }),
            }
            in_quote = true;
            continue;
        }
        if let Some(c) = LIST_ITEM.captures(line) {
            let content = c[1].trim();
            match INLINE_QUOTE.find(content) {
                Some(m) => {
                    items.push(SummaryQuote {
                        summary: content[..m.start()].trim().to_string(),
                        quote: Some(content[m.end()..].trim().to_string()),
                    });
                    in_quote = true;
                }
                None => {
                    items.push(SummaryQuote { summary: content.to_string(), quote: None });
                    in_quote = false;
                }
            }
            continue;
        }
        // continuation line
        if let Some(last) = items.last_mut() {
            let t = line.trim();
            if in_quote {
                if let Some(q) = last.quote.as_mut() {
                    q.push(' ');
                    q.push_str(t);
                }
            } else if last.quote.is_none() {
                if !last.summary.is_empty() {
                    last.summary.push(' ');
                }
                last.summary.push_str(t);
            }
        }
    }
    for item in &mut items {
        if let Some(q) = item.quote.take() {
            let q = strip_enclosing_quotes(&q);
            item.quote = (!q.is_empty()).then_some(q);
        }
    }
    items
}

// ---------------------------------------------------------------- A1C prediction

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedA1C {
    /// One-decimal value; `None` is a non-response.
    pub value: Option<f64>,
    pub justification: String,
    pub quotes: Vec<String>,
}

impl PredictedA1C {
    pub fn non_response() -> Self {
        Self { value: None, justification: String::new(), quotes: Vec::new() }
    }
}

static A1C_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)a1c\s+level[ \t*_]*:[ \t*_]*([^\n]*)").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());
static RANGE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\bbetween\b|\d(?:\.\d+)?\s*%?\s*(?:-|–|—|\bto\b|\bor\b|\band\b)\s*\d").unwrap()
});
static PRED_JUSTIFICATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)justification[ \t*_]*:[ \t*_]*").unwrap());
static SUPPORTING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)supporting\s+quotes[ \t*_]*:[ \t*_]*").unwrap());
static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""([^"\n]+)"|“([^”\n]+)”"#).unwrap());

pub fn parse_a1c_prediction(response: &str) -> PredictedA1C {
    let Some(caps) = A1C_MARKER.captures(response) else {
        return PredictedA1C::non_response();
    };
    let marker_end = caps.get(0).unwrap().end();
    let mut value_text = caps[1].trim().to_string();
    if value_text.is_empty() {
        value_text = response[marker_end..].lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("").to_string();
    }
    let value = if RANGE.is_match(&value_text) {
        None
    } else {
        NUMBER
            .find(&value_text)
            .and_then(|m| m.as_str().parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .map(crate::round1)
    };

    let rest = &response[marker_end..];
    let (justification, quotes_text) = match (PRED_JUSTIFICATION.find(rest), SUPPORTING.find(rest)) {
        (Some(j), Some(s)) if s.start() >= j.end() => (&rest[j.end()..s.start()], &rest[s.end()..]),
        (Some(j), _) => (&rest[j.end()..], ""),
        (None, Some(s)) => ("", &rest[s.end()..]),
        (None, None) => ("", ""),
    };
    let mut quotes: Vec<String> = QUOTED
        .captures_iter(quotes_text)
        .filter_map(|c| c.get(1).or_else(|| c.get(2)).map(|m| m.as_str().trim().to_string()))
        .filter(|q| !q.is_empty())
        .collect();
    if quotes.is_empty() {
        quotes = quotes_text
            .lines()
            .filter_map(|l| LIST_ITEM.captures(l).map(|c| strip_enclosing_quotes(&c[1])))
            .filter(|q| !q.is_empty())
            .collect();
    }
    PredictedA1C {
        value,
        justification: justification.split_whitespace().collect::<Vec<_>>().join(" "),
        quotes,
    }
}
