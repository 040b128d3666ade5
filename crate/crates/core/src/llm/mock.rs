//! Deterministic offline backend.
//!
//! Responses are pure functions of (template, bindings): fixtures are served
//! first (by rendered-prompt digest, then by template name); otherwise the
//! mock synthesises a response by recognising the sentence-bank phrases that
//! the synthetic generator plants in transcripts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backend::{ChatBackend, ChatExchange, EmbeddingBackend, PromptRequest};
use super::embedding::hashed_embedding;
use super::template::TemplateName;
use super::GatewayError;
use crate::corpus::{level_phrase, SentenceBank, SUBTOPIC_CODES};
use crate::corpus::{redact_numeric_a1c, verify_redaction};

/// Sentences the mock injects as fabricated quotes. Their vocabulary never
/// occurs in generated transcripts.
pub const FABRICATED_QUOTES: [&str; 6] = [
    "My pet iguana Bartholomew keeps a spreadsheet of every meal I eat.",
    "I flew a hot air balloon to the pharmacy last Thursday afternoon.",
    "The zeppelin captain next door lends me his saxophone on weekends.",
    "My accordion teacher insists that pistachio gelato cures everything.",
    "Every winter I knit sweaters for the penguins at the aquarium.",
    "A wizard at the carnival told me to juggle pineapples for exercise.",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    pub model_id: String,
    pub seed: u64,
    /// Probability that a rating is shifted by ±1 (clamped to 1..=5).
    pub rating_noise: f64,
    /// Probability that a rating response carries one fabricated quote.
    pub fabrication_rate: f64,
    /// Probability that an A1C prediction answers with a range.
    pub non_response_rate: f64,
    pub embedding_dim: usize,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            model_id: "mock".into(),
            seed: 0,
            rating_noise: 0.0,
            fabrication_rate: 0.0,
            non_response_rate: 0.0,
            embedding_dim: 384,
        }
    }
}

/// A fabricated quote the mock inserted into a response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub prompt_digest: String,
    pub subtopic_label: String,
    pub quote: String,
}

/// Counts of A1C-prediction prompts seen and how many carried residual
/// numeric A1C mentions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PredictionAudit {
    pub prompts: usize,
    pub residual: usize,
}

pub struct MockBackend {
    config: MockConfig,
    by_digest: BTreeMap<String, String>,
    by_template: BTreeMap<TemplateName, String>,
    injections: Mutex<Vec<Injection>>,
    audit: Mutex<PredictionAudit>,
}

impl MockBackend {
    pub fn new(config: MockConfig) -> Result<Self, GatewayError> {
        for (name, p) in [
            ("rating_noise", config.rating_noise),
            ("fabrication_rate", config.fabrication_rate),
            ("non_response_rate", config.non_response_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GatewayError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if config.embedding_dim == 0 {
            return Err(GatewayError::Config("embedding_dim must be positive".into()));
        }
        Ok(Self {
            config,
            by_digest: BTreeMap::new(),
            by_template: BTreeMap::new(),
            injections: Mutex::new(Vec::new()),
            audit: Mutex::new(PredictionAudit::default()),
        })
    }

    /// Serve `response` for the prompt whose rendered text hashes to `digest`.
    pub fn with_fixture(mut self, digest: impl Into<String>, response: impl Into<String>) -> Self {
        self.by_digest.insert(digest.into(), response.into());
        self
    }

    /// Serve `response` for every prompt of `template` without a digest fixture.
    pub fn with_template_fixture(mut self, template: TemplateName, response: impl Into<String>) -> Self {
        self.by_template.insert(template, response.into());
        self
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    /// Fabricated quotes injected so far, sorted for order-independence.
    pub fn injections(&self) -> Vec<Injection> {
        let mut v = self.injections.lock().unwrap_or_else(|e| e.into_inner()).clone();
        v.sort_by(|a, b| (&a.prompt_digest, &a.quote).cmp(&(&b.prompt_digest, &b.quote)));
        v
    }

    pub fn prediction_audit(&self) -> PredictionAudit {
        *self.audit.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn rng_for(&self, request: &PromptRequest) -> ChaCha8Rng {
        crate::seed::stream_rng(self.config.seed, &format!("mock/{}", request.bindings_digest()))
    }

    fn respond(&self, request: &PromptRequest) -> String {
        if let Some(r) = self.by_digest.get(&request.prompt_digest()) {
            return r.clone();
        }
        if let Some(r) = self.by_template.get(&request.template) {
            return r.clone();
        }
        let bind = |k: &str| request.bindings.get(k).map(String::as_str).unwrap_or("");
        let mut rng = self.rng_for(request);
        match request.template {
            TemplateName::ThemeExtraction => theme_response(bind("interview_text"), &mut rng),
            TemplateName::FactorSummary => factor_response(bind("keywords"), bind("context")),
            TemplateName::SubtopicRating => self.rating_response(request, &mut rng),
            TemplateName::A1cRedaction => redact_numeric_a1c(bind("interview_text")),
            TemplateName::A1cPrediction => self.prediction_response(bind("interview_text"), &mut rng),
        }
    }

    fn rating_response(&self, request: &PromptRequest, rng: &mut ChaCha8Rng) -> String {
        let label = request.bindings.get("subtopic_label").map(String::as_str).unwrap_or("");
        let text = request.bindings.get("subtopic_text").map(String::as_str).unwrap_or("");
        let found = SentenceBank::subtopic_index(label)
            .and_then(|s| SentenceBank::detect_level(s, text).map(|level| (s, level)));
        let Some((subtopic, level)) = found else {
            return "Rating: -1\nJustification: The excerpts do not discuss this subtopic.\nSummary And Quotes:\n"
                .to_string();
        };
        let mut rating = level;
        if rng.random_bool(self.config.rating_noise) {
            rating = if rng.random_bool(0.5) { rating.saturating_add(1) } else { rating.saturating_sub(1) };
            rating = rating.clamp(1, 5);
        }
        let phrase = level_phrase(subtopic, level);
        let quote = supporting_quote(text, phrase).unwrap_or_else(|| phrase.to_string());
        let mut out = format!(
            "Rating: {rating}\nJustification: The interviewee states that {phrase}.\nSummary And Quotes:\n\
             - The interviewee describes their situation regarding {}.\nQuote: \"{quote}\"\n",
            label.to_lowercase()
        );
        if rng.random_bool(self.config.fabrication_rate) {
            let fabricated = FABRICATED_QUOTES[rng.random_range(0..FABRICATED_QUOTES.len())];
            let _ = write!(out, "- The interviewee mentions an unusual habit.\nQuote: \"{fabricated}\"\n");
            self.injections.lock().unwrap_or_else(|e| e.into_inner()).push(Injection {
                prompt_digest: request.prompt_digest(),
                subtopic_label: label.to_string(),
                quote: fabricated.to_string(),
            });
        }
        out
    }

    fn prediction_response(&self, text: &str, rng: &mut ChaCha8Rng) -> String {
        {
            let mut audit = self.audit.lock().unwrap_or_else(|e| e.into_inner());
            audit.prompts += 1;
            if !verify_redaction(text).clean {
                audit.residual += 1;
            }
        }
        if rng.random_bool(self.config.non_response_rate) {
            return "A1C Level: between 6.5 and 7.5\nJustification: The interview does not allow a single estimate.\n\
                    Supporting Quotes:\n"
                .to_string();
        }
        // Diet type, self-care practices and medication adherence.
        let mut signal = 0.0;
        let mut quotes = Vec::new();
        for subtopic in [3usize, 13, 14] {
            if let Some(level) = SentenceBank::detect_level(subtopic, text) {
                signal += f64::from(level) - 3.0;
                if let Some(q) = supporting_quote(text, level_phrase(subtopic, level)) {
                    quotes.push(q);
                }
            }
        }
        let value = (7.0 - 0.25 * signal + rng.random_range(-0.6..0.6)).clamp(4.5, 12.0);
        let mut out = format!(
            "A1C Level: {value:.1}\nJustification: The estimate reflects the diet, self-care and medication habits \
             described in the interview.\nSupporting Quotes:\n"
        );
        for q in quotes {
            let _ = writeln!(out, "- \"{q}\"");
        }
        out
    }
}

fn theme_response(text: &str, rng: &mut ChaCha8Rng) -> String {
    let mut items = Vec::new();
    for (s, codes) in SUBTOPIC_CODES.iter().enumerate() {
        if let Some(level) = SentenceBank::detect_level(s, text) {
            let quote = supporting_quote(text, level_phrase(s, level)).unwrap_or_default();
            let code = codes[rng.random_range(0..codes.len())];
            items.push(serde_json::json!({ "code": code, "quotes": [quote] }));
        }
    }
    let json = serde_json::to_string_pretty(&items).unwrap_or_else(|_| "[]".into());
    match rng.random_range(0..3) {
        0 => format!("```json\n{json}\n```"),
        1 => format!("Here are the extracted codes:\n{json}"),
        _ => json,
    }
}

fn factor_response(keywords: &str, context: &str) -> String {
    let keys: Vec<String> = keywords
        .split(',')
        .map(|k| k.trim().to_string())
        .filter(|k| !k.is_empty())
        .collect();
    let mut bullets = Vec::new();
    for sentence in sentences(context) {
        let lower = sentence.to_lowercase();
        let hit = keys.iter().find(|k| {
            let stem = k.to_lowercase();
            let stem = stem.strip_suffix('s').unwrap_or(&stem).to_string();
            lower.contains(&stem)
        });
        if let Some(k) = hit {
            bullets.push(format!("- [{k}][{}]: {sentence}", timeframe(&lower)));
        }
        if bullets.len() == 5 {
            break;
        }
    }
    if bullets.is_empty() {
        "No information available.".to_string()
    } else {
        bullets.join("\n")
    }
}

fn timeframe(lower: &str) -> &'static str {
    if ["used to", " ago", "when i was", "grew up", "back then"].iter().any(|m| lower.contains(m)) {
        "Past"
    } else if ["plan to", "next year", "will ", "hope to", "going to"].iter().any(|m| lower.contains(m)) {
        "Future"
    } else {
        "Present"
    }
}

/// Sentences of `text`; blank lines separate excerpts and never join sentences.
fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for excerpt in text.split("\n\n") {
        out.extend(excerpt_sentences(excerpt));
    }
    out
}

fn excerpt_sentences(excerpt: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = excerpt.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            let s = current.split_whitespace().collect::<Vec<_>>().join(" ");
            if !s.is_empty() {
                out.push(s);
            }
            current.clear();
        }
    }
    let s = current.split_whitespace().collect::<Vec<_>>().join(" ");
    if !s.is_empty() {
        out.push(s);
    }
    out
}

/// The sentence containing `phrase` plus one neighbour from the same excerpt.
fn supporting_quote(text: &str, phrase: &str) -> Option<String> {
    let needle = phrase.to_lowercase();
    for excerpt in text.split("\n\n") {
        let sents = excerpt_sentences(excerpt);
        if let Some(i) = sents.iter().position(|s| s.to_lowercase().contains(&needle)) {
            let quote = if i + 1 < sents.len() {
                format!("{} {}", sents[i], sents[i + 1])
            } else if i > 0 {
                format!("{} {}", sents[i - 1], sents[i])
            } else {
                sents[i].clone()
            };
            return Some(quote);
        }
    }
    None
}

impl ChatBackend for MockBackend {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn complete(&self, request: &PromptRequest) -> Result<ChatExchange, GatewayError> {
        Ok(ChatExchange {
            template: request.template,
            model_id: self.config.model_id.clone(),
            prompt_digest: request.prompt_digest(),
            rendered_prompt: request.rendered.clone(),
            response_text: self.respond(request),
            latency_ms: 0,
            attempt_count: 1,
        })
    }
}

impl EmbeddingBackend for MockBackend {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        Ok(texts.iter().map(|t| hashed_embedding(t, self.config.embedding_dim)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{embed, parse_a1c_prediction, parse_factor_bullets, parse_rating_block, parse_theme_json};
    use crate::llm::{verify_quotes_in, FactorBullets};

    fn mock() -> MockBackend {
        MockBackend::new(MockConfig::default()).unwrap()
    }

    fn rating_request(label: &str, text: &str) -> PromptRequest {
        PromptRequest::with(
            TemplateName::SubtopicRating,
            [("subtopic_label", label.into()), ("scale_text", String::new()), ("subtopic_text", text.into())],
        )
        .unwrap()
    }

    #[test]
    fn responses_are_deterministic() {
        let req = PromptRequest::with(TemplateName::A1cPrediction, [("interview_text", "I like walking.".into())])
            .unwrap();
        let a = mock().complete(&req).unwrap();
        let b = mock().complete(&req).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.attempt_count, 1);
    }

    #[test]
    fn fixtures_take_precedence() {
        let req = PromptRequest::with(TemplateName::A1cPrediction, [("interview_text", "x".into())]).unwrap();
        let m = mock()
            .with_template_fixture(TemplateName::A1cPrediction, "A1C Level: 6.5")
            .with_fixture(crate::sha256_hex("nope"), "unused");
        assert_eq!(m.complete(&req).unwrap().response_text, "A1C Level: 6.5");
        let m = m.with_fixture(req.prompt_digest(), "A1C Level: 9.9");
        assert_eq!(m.complete(&req).unwrap().response_text, "A1C Level: 9.9");
    }

    #[test]
    fn reads_planted_level_with_verifiable_quote() {
        let label = "Social Support - Family Support";
        let s = SentenceBank::subtopic_index(label).unwrap();
        let text = format!(
            "I grew up by the coast. {} We moved later.\n\nUnrelated excerpt here.",
            SentenceBank::planted_sentence(s, 4, 0)
        );
        let ex = mock().complete(&rating_request(label, &text)).unwrap();
        let block = parse_rating_block(&ex.response_text).unwrap();
        assert_eq!(block.rating, 4);
        let checks = verify_quotes_in(&block.quotes(), &text);
        assert!(!checks.is_empty() && checks.iter().all(|c| c.verified));
    }

    #[test]
    fn absent_subtopic_rates_minus_one() {
        let ex = mock().complete(&rating_request("Diet - Diet Type", "I grew up by the coast.")).unwrap();
        assert_eq!(parse_rating_block(&ex.response_text).unwrap().rating, -1);
    }

    #[test]
    fn fabricated_quotes_are_logged_and_unverifiable() {
        let m = MockBackend::new(MockConfig { fabrication_rate: 1.0, ..MockConfig::default() }).unwrap();
        let label = "Diet - Diet Type";
        let text = SentenceBank::planted_sentence(SentenceBank::subtopic_index(label).unwrap(), 2, 1);
        let ex = m.complete(&rating_request(label, &text)).unwrap();
        let quotes = parse_rating_block(&ex.response_text).unwrap().quotes();
        let inj = m.injections();
        assert_eq!(inj.len(), 1);
        for c in verify_quotes_in(&quotes, &text) {
            assert_eq!(!c.verified, inj.iter().any(|i| i.quote == c.quote));
        }
    }

    #[test]
    fn noise_moves_rating_by_at_most_one() {
        let m = MockBackend::new(MockConfig { rating_noise: 1.0, ..MockConfig::default() }).unwrap();
        let label = "Diet - Diet Type";
        let s = SentenceBank::subtopic_index(label).unwrap();
        for level in 1..=5u8 {
            let text = SentenceBank::planted_sentence(s, level, 0);
            let r = parse_rating_block(&m.complete(&rating_request(label, &text)).unwrap().response_text).unwrap();
            assert!((i16::from(r.rating) - i16::from(level)).abs() <= 1 && (1..=5).contains(&r.rating));
        }
    }

    #[test]
    fn theme_and_factor_responses_parse() {
        let s = SentenceBank::subtopic_index("Diet - Diet Type").unwrap();
        let text = SentenceBank::planted_sentence(s, 5, 2);
        let req = PromptRequest::with(TemplateName::ThemeExtraction, [("interview_text", text.clone())]).unwrap();
        let themes = parse_theme_json(&mock().complete(&req).unwrap().response_text).unwrap();
        assert_eq!(themes.codes.len(), 1);
        let req = PromptRequest::with(
            TemplateName::FactorSummary,
            [("topic", "Diet".into()), ("keywords", "Diet, Meals, Vegetables".into()), ("context", text)],
        )
        .unwrap();
        match parse_factor_bullets(&mock().complete(&req).unwrap().response_text) {
            FactorBullets::Items { bullets, .. } => assert_eq!(bullets.len(), 1),
            other => panic!("{other:?}"),
        }
        let req = PromptRequest::with(
            TemplateName::FactorSummary,
            [("topic", "Diet".into()), ("keywords", "Diet".into()), ("context", "We went fishing.".into())],
        )
        .unwrap();
        assert_eq!(parse_factor_bullets(&mock().complete(&req).unwrap().response_text), FactorBullets::NoInformation);
    }

    #[test]
    fn prediction_audit_flags_residue() {
        let m = mock();
        for text in ["my A1C was 8.1 last time", "my [REMOVED] A1C reading"] {
            let req = PromptRequest::with(TemplateName::A1cPrediction, [("interview_text", text.into())]).unwrap();
            let p = parse_a1c_prediction(&m.complete(&req).unwrap().response_text);
            assert!(p.value.is_some());
        }
        assert_eq!(m.prediction_audit(), PredictionAudit { prompts: 2, residual: 1 });
    }

    #[test]
    fn embeddings_are_unit_and_repeatable() {
        let v = embed(&mock(), &["a cat".into(), "a cat".into(), "dogs bark".into()]).unwrap();
        assert_eq!(v[0], v[1]);
        assert!((v[0].dot(&v[0]) - 1.0).abs() < 1e-9);
        assert!(v.iter().all(|e| e.dim() == 384));
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(MockBackend::new(MockConfig { rating_noise: 1.5, ..MockConfig::default() }).is_err());
    }
}
