//! Client for OpenAI-compatible chat and embedding endpoints.
//!
//! Every call goes through a bounded in-flight limiter, a retry loop with
//! exponential backoff and a response cache keyed by a SHA-256 fingerprint of
//! the request. Budget forcing suppresses the end-of-thinking delimiter a
//! fixed number of times and splices in continuation text.

mod cache;
#[cfg(feature = "http")]
mod http;
mod mock;
mod synthetic;
mod transport;

use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use cache::{cache_key, ResponseCache};
#[cfg(feature = "http")]
pub use http::HttpTransport;
pub use mock::{MockTransport, MockStats};
pub use synthetic::SyntheticModel;
pub use transport::{
    parse_chat_body, parse_embedding_body, ChatMessage, ChatRequest, ChatResponse, EmbeddingRequest, Transport,
    TransportFailure,
};

pub const DEFAULT_DELIMITER: &str = "</think>";
pub const THINK_OPEN: &str = "<think>";
pub const ZERO_THINK_PREFIX: &str = "<think></think>";
pub const LESS_THINK_PREFIX: &str =
    "<think>Okay, the user ask for this, I can answer it without thinking much.</think>";
pub const DEFAULT_CONTINUATION: &str = "Wait, I need to think from {role}'s perspective.";
pub const BARE_CONTINUATION: &str = "Wait,";

/// Base URL that selects the built-in [`SyntheticModel`] instead of HTTP.
pub const MOCK_URL_SCHEME: &str = "mock://";

pub const ENV_API_KEY: &str = "DIVR_API_KEY";
pub const ENV_BASE_URL: &str = "DIVR_BASE_URL";
pub const ENV_CACHE_DIR: &str = "DIVR_CACHE_DIR";
pub const ENV_MODEL: &str = "DIVR_MODEL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no end-of-thinking delimiter within the token budget of segment {segment}")]
    BudgetExceeded { segment: usize },
    #[error("invalid decode strategy: {0}")]
    InvalidStrategy(String),
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    #[serde(skip_serializing, default)]
    pub api_key: String,
    pub model_id: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub concurrency_limit: usize,
    /// First backoff delay; doubles on every retry.
    pub retry_base_delay_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            api_key: String::new(),
            model_id: "default".into(),
            timeout_secs: 120.0,
            max_retries: 3,
            concurrency_limit: 8,
            retry_base_delay_ms: 500,
        }
    }
}

impl EndpointConfig {
    /// Defaults overridden by `DIVR_BASE_URL`, `DIVR_API_KEY` and `DIVR_MODEL`.
    pub fn from_env() -> Self {
        let mut config = Self::default();
        if let Ok(url) = std::env::var(ENV_BASE_URL) {
            config.base_url = url;
        }
        if let Ok(key) = std::env::var(ENV_API_KEY) {
            config.api_key = key;
        }
        if let Ok(model) = std::env::var(ENV_MODEL) {
            config.model_id = model;
        }
        config
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(GatewayError::InvalidConfig(format!("timeout must be > 0, got {}", self.timeout_secs)));
        }
        if self.concurrency_limit < 1 {
            return Err(GatewayError::InvalidConfig("concurrency_limit must be >= 1".into()));
        }
        Ok(())
    }

    pub fn is_mock(&self) -> bool {
        self.base_url.starts_with(MOCK_URL_SCHEME)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    ZeroThink,
    LessThink,
    RegularThink,
    MoreThink,
}

impl FromStr for DecodeMode {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "zerothink" | "zero" => Ok(Self::ZeroThink),
            "lessthink" | "less" => Ok(Self::LessThink),
            "regularthink" | "regular" => Ok(Self::RegularThink),
            "morethink" | "more" => Ok(Self::MoreThink),
            _ => Err(GatewayError::InvalidStrategy(format!("unknown decode mode {s:?}"))),
        }
    }
}

impl DecodeMode {
    /// Text placed at the start of the assistant turn.
    pub fn prefix(self) -> &'static str {
        match self {
            DecodeMode::ZeroThink => ZERO_THINK_PREFIX,
            DecodeMode::LessThink => LESS_THINK_PREFIX,
            DecodeMode::RegularThink | DecodeMode::MoreThink => THINK_OPEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeStrategy {
    pub mode: DecodeMode,
    /// Number of suppressed delimiters; only meaningful for `MoreThink`.
    pub wait_count: u32,
    /// Continuation spliced in at each suppressed delimiter. `{role}` is
    /// replaced by the next role of the role sequence.
    pub continuation_template: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub delimiter: String,
}

impl Default for DecodeStrategy {
    fn default() -> Self {
        Self {
            mode: DecodeMode::RegularThink,
            wait_count: 0,
            continuation_template: DEFAULT_CONTINUATION.into(),
            temperature: 0.7,
            top_p: 0.95,
            max_new_tokens: 4096,
            delimiter: DEFAULT_DELIMITER.into(),
        }
    }
}

impl DecodeStrategy {
    pub fn new(mode: DecodeMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    /// `MoreThink` with the given number of continuations (three by default
    /// in the CLI).
    pub fn more_think(wait_count: u32) -> Self {
        Self {
            mode: DecodeMode::MoreThink,
            wait_count,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.wait_count != 0 && self.mode != DecodeMode::MoreThink {
            return Err(GatewayError::InvalidStrategy("wait_count requires more_think".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(GatewayError::InvalidStrategy(format!("temperature {} < 0", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidStrategy(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if self.delimiter.is_empty() {
            return Err(GatewayError::InvalidStrategy("empty delimiter".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(GatewayError::InvalidStrategy("max_new_tokens must be > 0".into()));
        }
        Ok(())
    }

    /// Continuation text for the injection at `index` (0-based).
    pub fn continuation(&self, roles: &[String], index: usize) -> String {
        match roles.get(index) {
            Some(role) => self.continuation_template.replace("{role}", role),
            None => BARE_CONTINUATION.to_string(),
        }
    }
}

/// Decoded assistant output split at the end-of-thinking delimiter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    /// Full assistant turn: mode prefix, generated segments and injections.
    pub text: String,
    pub think_text: String,
    pub answer_text: String,
    pub injected_continuations: u32,
    pub raw_segments: Vec<String>,
    #[serde(default)]
    pub cache_hit: bool,
}

impl CompletionResult {
    fn from_text(text: String, delimiter: &str, injected: u32, raw_segments: Vec<String>) -> Self {
        let (think_text, answer_text) = split_think(&text, delimiter);
        Self {
            text,
            think_text,
            answer_text,
            injected_continuations: injected,
            raw_segments,
            cache_hit: false,
        }
    }
}

/// Splits at the last delimiter. Without a delimiter the whole body is the
/// answer and the think segment is empty.
pub fn split_think(text: &str, delimiter: &str) -> (String, String) {
    let body = text.strip_prefix(THINK_OPEN).unwrap_or(text);
    match body.rfind(delimiter) {
        Some(pos) => (
            body[..pos].trim().to_string(),
            body[pos + delimiter.len()..].trim().to_string(),
        ),
        None => (String::new(), body.trim().to_string()),
    }
}

struct Limiter {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(limit: usize) -> Self {
        Self {
            limit,
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter poisoned");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("limiter poisoned");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().expect("limiter poisoned");
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Shareable model client. Clone-free: wrap in `Arc` or borrow across threads.
pub struct Gateway {
    config: EndpointConfig,
    transport: Arc<dyn Transport>,
    cache: ResponseCache,
    limiter: Limiter,
}

impl Gateway {
    /// Gateway with an in-memory cache.
    pub fn new(config: EndpointConfig, transport: Arc<dyn Transport>) -> Result<Self, GatewayError> {
        Self::with_cache(config, transport, ResponseCache::memory())
    }

    pub fn with_cache(
        config: EndpointConfig,
        transport: Arc<dyn Transport>,
        cache: ResponseCache,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        let limiter = Limiter::new(config.concurrency_limit);
        Ok(Self {
            config,
            transport,
            cache,
            limiter,
        })
    }

    /// Picks the transport from the base URL (`mock://` selects the synthetic
    /// model) and the cache from `DIVR_CACHE_DIR`.
    pub fn from_config(config: EndpointConfig) -> Result<Self, GatewayError> {
        let transport: Arc<dyn Transport> = if config.is_mock() {
            Arc::new(SyntheticModel::default())
        } else {
            #[cfg(feature = "http")]
            {
                Arc::new(HttpTransport::new(&config))
            }
            #[cfg(not(feature = "http"))]
            {
                return Err(GatewayError::InvalidConfig("built without the http feature".into()));
            }
        };
        let cache = match std::env::var(ENV_CACHE_DIR) {
            Ok(dir) if !dir.is_empty() => ResponseCache::disk(dir)?,
            _ => ResponseCache::memory(),
        };
        Self::with_cache(config, transport, cache)
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, TransportFailure>) -> Result<T, GatewayError> {
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let outcome = {
                let _permit = self.limiter.acquire();
                call()
            };
            match outcome {
                Ok(v) => return Ok(v),
                Err(TransportFailure::Malformed(m)) => return Err(GatewayError::Protocol(m)),
                Err(TransportFailure::Fatal(m)) => {
                    return Err(GatewayError::Transport {
                        attempts: attempt,
                        message: m,
                    })
                }
                Err(TransportFailure::Transient(m)) => {
                    if attempt > self.config.max_retries {
                        return Err(GatewayError::Transport {
                            attempts: attempt,
                            message: m,
                        });
                    }
                    log::warn!("transient failure (attempt {attempt}): {m}");
                    let delay = self.config.retry_base_delay_ms.saturating_mul(1 << (attempt - 1).min(16));
                    if delay > 0 {
                        std::thread::sleep(Duration::from_millis(delay));
                    }
                }
            }
        }
    }

    fn chat(&self, prompt: &str, prefill: &str, strategy: &DecodeStrategy, sample: u64) -> Result<ChatResponse, GatewayError> {
        let mut messages = vec![ChatMessage::user(prompt)];
        if !prefill.is_empty() {
            messages.push(ChatMessage::assistant(prefill));
        }
        let request = ChatRequest {
            model: self.config.model_id.clone(),
            messages,
            temperature: strategy.temperature,
            top_p: strategy.top_p,
            max_tokens: strategy.max_new_tokens,
            seed: Some(sample),
        };
        self.with_retries(|| self.transport.chat(&request))
    }

    fn cached<T, F>(&self, fingerprint: serde_json::Value, compute: F) -> Result<(T, bool), GatewayError>
    where
        T: Serialize + serde::de::DeserializeOwned,
        F: FnOnce() -> Result<T, GatewayError>,
    {
        if let Some(hit) = self.cache.get(&fingerprint)? {
            return Ok((hit, true));
        }
        let fresh = compute()?;
        self.cache.put(&fingerprint, &fresh)?;
        Ok((fresh, false))
    }

    /// Single completion with the mode's prefix (sample index 0).
    pub fn complete(&self, prompt: &str, strategy: &DecodeStrategy) -> Result<CompletionResult, GatewayError> {
        self.complete_sample(prompt, strategy, 0)
    }

    /// Like [`complete`](Self::complete); distinct `sample` values are
    /// independent, replayable draws. `MoreThink` is routed to budget forcing
    /// with bare continuations.
    pub fn complete_sample(
        &self,
        prompt: &str,
        strategy: &DecodeStrategy,
        sample: u64,
    ) -> Result<CompletionResult, GatewayError> {
        if strategy.mode == DecodeMode::MoreThink {
            return self.budget_forced_sample(prompt, &[], strategy, sample);
        }
        if prompt.is_empty() {
            return Err(GatewayError::InvalidStrategy("empty prompt".into()));
        }
        strategy.validate()?;
        let fingerprint = json!({
            "op": "complete",
            "model": self.config.model_id,
            "prompt": prompt,
            "strategy": strategy,
            "sample": sample,
        });
        let (mut result, hit) = self.cached(fingerprint, || {
            let prefix = strategy.mode.prefix();
            let response = self.chat(prompt, prefix, strategy, sample)?;
            let text = format!("{prefix}{}", response.text);
            Ok(CompletionResult::from_text(text, &strategy.delimiter, 0, vec![response.text]))
        })?;
        result.cache_hit = hit;
        Ok(result)
    }

    pub fn budget_forced_complete(
        &self,
        prompt: &str,
        roles: &[String],
        strategy: &DecodeStrategy,
    ) -> Result<CompletionResult, GatewayError> {
        self.budget_forced_sample(prompt, roles, strategy, 0)
    }

    /// Regular thinking, except that the first `wait_count` delimiters are cut
    /// and replaced by continuation text naming the next role.
    pub fn budget_forced_sample(
        &self,
        prompt: &str,
        roles: &[String],
        strategy: &DecodeStrategy,
        sample: u64,
    ) -> Result<CompletionResult, GatewayError> {
        if strategy.mode != DecodeMode::MoreThink {
            return Err(GatewayError::InvalidStrategy("budget forcing requires more_think".into()));
        }
        if prompt.is_empty() {
            return Err(GatewayError::InvalidStrategy("empty prompt".into()));
        }
        strategy.validate()?;
        if !roles.is_empty() && roles.len() < strategy.wait_count as usize {
            return Err(GatewayError::InvalidStrategy(format!(
                "{} roles for {} continuations",
                roles.len(),
                strategy.wait_count
            )));
        }
        let fingerprint = json!({
            "op": "budget_forced",
            "model": self.config.model_id,
            "prompt": prompt,
            "roles": roles,
            "strategy": strategy,
            "sample": sample,
        });
        let (mut result, hit) = self.cached(fingerprint, || self.force(prompt, roles, strategy, sample))?;
        result.cache_hit = hit;
        Ok(result)
    }

    fn force(
        &self,
        prompt: &str,
        roles: &[String],
        strategy: &DecodeStrategy,
        sample: u64,
    ) -> Result<CompletionResult, GatewayError> {
        let delim = strategy.delimiter.as_str();
        let mut context = String::from(THINK_OPEN);
        let mut segments = Vec::new();
        let mut injected = 0u32;
        loop {
            let response = self.chat(prompt, &context, strategy, sample)?;
            let segment = response.text;
            segments.push(segment.clone());
            let Some(pos) = segment.find(delim) else {
                return Err(GatewayError::BudgetExceeded { segment: segments.len() });
            };
            if injected < strategy.wait_count {
                context.push_str(segment[..pos].trim_end());
                context.push_str("\n\n");
                context.push_str(&strategy.continuation(roles, injected as usize));
                injected += 1;
                continue;
            }
            // keep exactly one delimiter: drop any repeats in the answer
            let answer = segment[pos + delim.len()..].replace(delim, "");
            context.push_str(&segment[..pos]);
            context.push_str(delim);
            context.push_str(&answer);
            return Ok(CompletionResult::from_text(context, delim, injected, segments));
        }
    }

    /// Embeds each text, cached per text.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::InvalidStrategy("nothing to embed".into()));
        }
        let fingerprint = |t: &str| json!({"op": "embed", "model": self.config.model_id, "text": t});
        let mut out: Vec<Option<Vec<f64>>> = Vec::with_capacity(texts.len());
        let mut missing = Vec::new();
        for (i, t) in texts.iter().enumerate() {
            let hit: Option<Vec<f64>> = self.cache.get(&fingerprint(t))?;
            if hit.is_none() {
                missing.push(i);
            }
            out.push(hit);
        }
        if !missing.is_empty() {
            let request = EmbeddingRequest {
                model: self.config.model_id.clone(),
                input: missing.iter().map(|&i| texts[i].clone()).collect(),
            };
            let vectors = self.with_retries(|| self.transport.embed(&request))?;
            if vectors.len() != missing.len() {
                return Err(GatewayError::Protocol(format!(
                    "asked for {} embeddings, got {}",
                    missing.len(),
                    vectors.len()
                )));
            }
            for (&i, v) in missing.iter().zip(vectors) {
                self.cache.put(&fingerprint(&texts[i]), &v)?;
                // first write wins: reread so concurrent callers agree
                out[i] = Some(self.cache.get(&fingerprint(&texts[i]))?.unwrap_or(v));
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}
