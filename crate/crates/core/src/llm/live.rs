//! OpenAI-compatible HTTP backend (`/chat/completions`, `/embeddings`).

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{ChatBackend, ChatExchange, EmbeddingBackend, PromptRequest, RateLimiter, Semaphore};
use super::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay_ms: 500, max_delay_ms: 30_000 }
    }
}

impl RetryPolicy {
    /// Exponential delay before attempt `attempt + 1`, with up to 100% jitter.
    pub fn delay(&self, attempt: u32, rng: &mut impl Rng) -> Duration {
        let exp = self.base_delay_ms.saturating_mul(1u64 << attempt.saturating_sub(1).min(20));
        let jittered = exp as f64 * (1.0 + rng.random::<f64>());
        Duration::from_millis((jittered as u64).min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    pub base_url: String,
    pub chat_model: String,
    pub embedding_model: String,
    /// Never serialised; supplied from the environment.
    #[serde(skip)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub max_parallel: usize,
    pub requests_per_second: Option<f64>,
    pub retry: RetryPolicy,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            chat_model: "gpt-4o".into(),
            embedding_model: "text-embedding-3-large".into(),
            api_key: None,
            temperature: 0.0,
            timeout_secs: 120,
            max_parallel: 4,
            requests_per_second: None,
            retry: RetryPolicy::default(),
        }
    }
}

pub struct LiveBackend {
    config: LiveConfig,
    agent: ureq::Agent,
    permits: Semaphore,
    limiter: RateLimiter,
    jitter_counter: AtomicU64,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(GatewayError),
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, GatewayError> {
        if config.max_parallel == 0 {
            return Err(GatewayError::Config("max_parallel must be at least 1".into()));
        }
        if config.retry.max_attempts == 0 {
            return Err(GatewayError::Config("retry.max_attempts must be at least 1".into()));
        }
        if !config.base_url.starts_with("http://") && !config.base_url.starts_with("https://") {
            return Err(GatewayError::Config(format!("base_url must be http(s): {}", config.base_url)));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            permits: Semaphore::new(config.max_parallel),
            limiter: RateLimiter::new(config.requests_per_second),
            config,
            agent,
            jitter_counter: AtomicU64::new(0),
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{path}", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, url: &str, body: &Value) -> Attempt {
        let _permit = self.permits.acquire();
        self.limiter.wait();
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        match req.send(body.to_string()) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                match status {
                    200..=299 => Attempt::Done(text),
                    429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
                    _ => Attempt::Fatal(GatewayError::Backend { status, body: text }),
                }
            }
            Err(e @ (ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed)) => {
                Attempt::Retry(e.to_string())
            }
            Err(e) => Attempt::Fatal(GatewayError::Transport { attempts: 1, last: e.to_string() }),
        }
    }

    /// POSTs `body`, retrying transient failures. Returns (body, attempts).
    fn post(&self, path: &str, body: &Value) -> Result<(String, u32), GatewayError> {
        let url = self.url(path);
        let stream = self.jitter_counter.fetch_add(1, Ordering::Relaxed);
        let mut rng = crate::seed::stream_rng(stream, "live/jitter");
        let mut last = String::new();
        for attempt in 1..=self.config.retry.max_attempts {
            match self.attempt(&url, body) {
                Attempt::Done(text) => return Ok((text, attempt)),
                Attempt::Fatal(GatewayError::Transport { last, .. }) => {
                    return Err(GatewayError::Transport { attempts: attempt, last })
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(why) => last = why,
            }
            if attempt < self.config.retry.max_attempts {
                std::thread::sleep(self.config.retry.delay(attempt, &mut rng));
            }
        }
        Err(GatewayError::Transport { attempts: self.config.retry.max_attempts, last })
    }
}

fn decode(text: &str) -> Result<Value, GatewayError> {
    serde_json::from_str(text).map_err(|e| GatewayError::Decode(e.to_string()))
}

impl ChatBackend for LiveBackend {
    fn model_id(&self) -> &str {
        &self.config.chat_model
    }

    fn complete(&self, request: &PromptRequest) -> Result<ChatExchange, GatewayError> {
        let body = json!({
            "model": self.config.chat_model,
            "temperature": self.config.temperature,
            "messages": [{ "role": "user", "content": request.rendered }],
        });
        let start = Instant::now();
        let (text, attempts) = self.post("chat/completions", &body)?;
        let latency_ms = start.elapsed().as_millis() as u64;
        let value = decode(&text)?;
        let content = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| GatewayError::Decode("missing choices[0].message.content".into()))?;
        Ok(ChatExchange {
            template: request.template,
            model_id: self.config.chat_model.clone(),
            prompt_digest: request.prompt_digest(),
            rendered_prompt: request.rendered.clone(),
            response_text: content.to_string(),
            latency_ms,
            attempt_count: attempts,
        })
    }
}

impl EmbeddingBackend for LiveBackend {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let body = json!({ "model": self.config.embedding_model, "input": texts });
        let (text, _) = self.post("embeddings", &body)?;
        let value = decode(&text)?;
        let data = value["data"].as_array().ok_or_else(|| GatewayError::Decode("missing data array".into()))?;
        let mut rows: Vec<(u64, Vec<f64>)> = Vec::with_capacity(data.len());
        for (i, item) in data.iter().enumerate() {
            let index = item["index"].as_u64().unwrap_or(i as u64);
            let vector = item["embedding"]
                .as_array()
                .ok_or_else(|| GatewayError::Decode(format!("data[{i}].embedding missing")))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| GatewayError::Decode(format!("data[{i}] has a non-number"))))
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push((index, vector));
        }
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}
