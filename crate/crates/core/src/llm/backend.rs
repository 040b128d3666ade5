//! Backend abstraction shared by the live HTTP client and the mock.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingVector;
use super::template::{render_prompt, PromptTemplate, TemplateName};
use super::GatewayError;

/// A rendered prompt together with the template and bindings it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRequest {
    pub template: TemplateName,
    pub bindings: BTreeMap<String, String>,
    pub rendered: String,
}

impl PromptRequest {
    pub fn new(template: TemplateName, bindings: BTreeMap<String, String>) -> Result<Self, GatewayError> {
        let rendered = render_prompt(&PromptTemplate::builtin(template), &bindings)?;
        Ok(Self { template, bindings, rendered })
    }

    pub fn with<const N: usize>(template: TemplateName, pairs: [(&str, String); N]) -> Result<Self, GatewayError> {
        Self::new(template, pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    /// Digest of the rendered prompt text.
    pub fn prompt_digest(&self) -> String {
        crate::sha256_hex(&self.rendered)
    }

    /// Digest of (template name, bindings); stable across runs.
    pub fn bindings_digest(&self) -> String {
        let mut buf = String::from(self.template.as_str());
        for (k, v) in &self.bindings {
            buf.push('\0');
            buf.push_str(k);
            buf.push('\0');
            buf.push_str(v);
        }
        crate::sha256_hex(buf)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub template: TemplateName,
    pub model_id: String,
    pub prompt_digest: String,
    pub rendered_prompt: String,
    pub response_text: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

pub trait ChatBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, request: &PromptRequest) -> Result<ChatExchange, GatewayError>;
}

pub trait EmbeddingBackend: Send + Sync {
    /// Raw (unnormalised) vectors, one per text, in input order.
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;
}

pub fn chat(backend: &dyn ChatBackend, request: &PromptRequest) -> Result<ChatExchange, GatewayError> {
    backend.complete(request)
}

/// Embeds `texts`, checking the backend contract and normalising to unit norm.
pub fn embed(backend: &dyn EmbeddingBackend, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
    if texts.is_empty() {
        return Err(GatewayError::InvalidInput("no texts to embed".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(GatewayError::InvalidInput(format!("text {i} is empty")));
    }
    let raw = backend.embed_raw(texts)?;
    if raw.len() != texts.len() {
        return Err(GatewayError::Decode(format!("expected {} embeddings, got {}", texts.len(), raw.len())));
    }
    let dim = raw[0].len();
    if dim == 0 || raw.iter().any(|v| v.len() != dim) {
        return Err(GatewayError::Decode("embedding dimensions differ".into()));
    }
    Ok(raw.into_iter().zip(texts).map(|(v, t)| EmbeddingVector::normalised(v, t)).collect())
}

/// Append-only JSON-lines sink; writes from concurrent callers are serialised.
pub struct ExchangeSink<W: Write + Send> {
    inner: Mutex<W>,
}

impl<W: Write + Send> ExchangeSink<W> {
    pub fn new(writer: W) -> Self {
        Self { inner: Mutex::new(writer) }
    }

    pub fn append(&self, exchange: &ChatExchange) -> std::io::Result<()> {
        let line = serde_json::to_string(exchange).map_err(std::io::Error::other)?;
        let mut w = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(w, "{line}")
    }

    pub fn into_inner(self) -> W {
        self.inner.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}

/// Counting semaphore capping in-flight requests.
pub struct Semaphore {
    permits: Mutex<usize>,
    cond: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self { permits: Mutex::new(permits.max(1)), cond: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.cond.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.permits.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.0.cond.notify_one();
    }
}

/// Spaces request starts at least `interval` apart across all threads.
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: Option<f64>) -> Self {
        let interval = match requests_per_second {
            Some(r) if r > 0.0 && r.is_finite() => Duration::from_secs_f64(1.0 / r),
            _ => Duration::ZERO,
        };
        Self { interval, next: Mutex::new(None) }
    }

    pub fn wait(&self) {
        if self.interval.is_zero() {
            return;
        }
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}
