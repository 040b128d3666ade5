//! Verbatim-quote verification.
//!
//! A quote is verified when its normalised form is a contiguous substring of
//! the normalised transcript. Normalisation: lower-case, collapse whitespace,
//! map curly/prime quote glyphs to ASCII, and (quotes only) drop leading and
//! trailing ellipses.

use serde::{Deserialize, Serialize};

use crate::corpus::Transcript;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteCheck {
    pub quote: String,
    pub verified: bool,
    /// Character offset of the match in the original transcript text.
    pub match_offset: Option<usize>,
}

fn fold_glyph(c: char) -> char {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' | '`' => '\'',
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' => '"',
        c => c,
    }
}

/// Normalised text plus, for each normalised char, the index of the source
/// char it came from.
fn normalise_with_map(text: &str) -> (Vec<char>, Vec<usize>) {
    let mut out = Vec::with_capacity(text.len());
    let mut map = Vec::with_capacity(text.len());
    let mut pending_space: Option<usize> = None;
    for (idx, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !out.is_empty() && pending_space.is_none() {
                pending_space = Some(idx);
            }
            continue;
        }
        if let Some(sp) = pending_space.take() {
            out.push(' ');
            map.push(sp);
        }
        for lc in fold_glyph(c).to_lowercase() {
            out.push(fold_glyph(lc));
            map.push(idx);
        }
    }
    (out, map)
}

pub fn normalise(text: &str) -> String {
    normalise_with_map(text).0.into_iter().collect()
}

pub fn normalise_quote(quote: &str) -> String {
    let mut q = normalise(quote);
    loop {
        let before = q.len();
        for marker in ["...", "…"] {
            if let Some(rest) = q.strip_prefix(marker) {
                q = rest.trim_start().to_string();
            }
            if let Some(rest) = q.strip_suffix(marker) {
                q = rest.trim_end().to_string();
            }
        }
        if q.len() == before {
            break;
        }
    }
    q
}

/// Pre-normalised haystack for checking many quotes against one text.
pub struct QuoteVerifier {
    normalised: String,
    char_starts: Vec<usize>,
    map: Vec<usize>,
}

impl QuoteVerifier {
    pub fn new(text: &str) -> Self {
        let (chars, map) = normalise_with_map(text);
        let normalised: String = chars.iter().collect();
        let char_starts = normalised.char_indices().map(|(b, _)| b).collect();
        Self { normalised, char_starts, map }
    }

    pub fn check(&self, quote: &str) -> QuoteCheck {
        let q = normalise_quote(quote);
        let offset = if q.is_empty() {
            None
        } else {
            self.normalised.find(&q).map(|byte| {
                let char_idx = self.char_starts.partition_point(|&b| b < byte);
                self.map[char_idx]
            })
        };
        QuoteCheck { quote: quote.to_string(), verified: offset.is_some(), match_offset: offset }
    }
}

pub fn verify_quotes(quotes: &[String], transcript: &Transcript) -> Vec<QuoteCheck> {
    verify_quotes_in(quotes, &transcript.text)
}

pub fn verify_quotes_in(quotes: &[String], text: &str) -> Vec<QuoteCheck> {
    let verifier = QuoteVerifier::new(text);
    quotes.iter().map(|q| verifier.check(q)).collect()
}
