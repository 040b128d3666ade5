//! Prompt templates, chat/embedding backends, response parsers and quote
//! verification.

mod backend;
mod embedding;
mod live;
mod mock;
mod parse;
mod quotes;
mod template;

pub use backend::{
    chat, embed, ChatBackend, ChatExchange, EmbeddingBackend, ExchangeSink, Permit, PromptRequest, RateLimiter,
    Semaphore,
};
pub use embedding::{content_tokens, hashed_embedding, EmbeddingVector};
pub use live::{LiveBackend, LiveConfig, RetryPolicy};
pub use mock::{Injection, MockBackend, MockConfig, PredictionAudit, FABRICATED_QUOTES};
pub use parse::{
    parse_a1c_prediction, parse_factor_bullets, parse_rating_block, parse_theme_json, strip_enclosing_quotes,
    FactorBullet, FactorBullets, ParseError, ParseIssue, PredictedA1C, RatingBlock, SummaryQuote, ThemeCode,
    ThemeParse, Timeframe,
};
pub use quotes::{normalise, normalise_quote, verify_quotes, verify_quotes_in, QuoteCheck, QuoteVerifier};
pub use template::{render_prompt, unfilled_placeholders, PromptTemplate, TemplateError, TemplateName};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Non-retryable HTTP status from the backend.
    #[error("backend returned HTTP {status}: {body}")]
    Backend { status: u16, body: String },
    /// Retries exhausted on transient failures.
    #[error("transport failed after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("could not decode backend response: {0}")]
    Decode(String),
    #[error("configuration: {0}")]
    Config(String),
}
