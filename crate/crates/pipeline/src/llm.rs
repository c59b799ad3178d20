//! Chat-completions client with retry, backoff and a shared rate limit.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("rate limited (HTTP 429)")]
    RateLimited { retry_after: Option<Duration> },
    #[error("server error HTTP {status}: {body}")]
    Server { status: u16, body: String },
    #[error("endpoint rejected request with HTTP {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("undecodable response: {0}")]
    Decode(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<LlmError> },
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport(_) | LlmError::Timeout | LlmError::RateLimited { .. } | LlmError::Server { .. })
    }

    /// The root error behind an `Exhausted` wrapper.
    pub fn root(&self) -> &LlmError {
        match self {
            LlmError::Exhausted { last, .. } => last.root(),
            e => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base: Duration::from_secs(2), max_delay: Duration::from_secs(60) }
    }
}

impl RetryPolicy {
    /// Delay after failed attempt `attempt` (1-based): `base · 2^(attempt−1)`.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.base.saturating_mul(factor).min(self.max_delay)
    }
}

/// Bucket refilled at `rate` tokens per second, holding at most `capacity`.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate: f64, capacity: f64) -> Self {
        let capacity = capacity.max(1.0);
        TokenBucket { rate, capacity, state: Mutex::new((capacity, Instant::now())) }
    }

    pub async fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().await;
                let now = Instant::now();
                s.0 = (s.0 + now.duration_since(s.1).as_secs_f64() * self.rate).min(self.capacity);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - s.0) / self.rate)
            };
            tokio::time::sleep(wait).await;
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChatConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub system_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub requests_per_second: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub attempts: u32,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

/// Accepts either the full `…/chat/completions` URL or an API base.
pub fn chat_url(endpoint: &str) -> String {
    let trimmed = endpoint.trim_end_matches('/');
    if trimmed.ends_with("/chat/completions") {
        trimmed.to_string()
    } else {
        format!("{trimmed}/chat/completions")
    }
}

fn retry_after(headers: &reqwest::header::HeaderMap) -> Option<Duration> {
    let v = headers.get(reqwest::header::RETRY_AFTER)?.to_str().ok()?;
    v.trim().parse::<f64>().ok().filter(|s| s.is_finite() && *s >= 0.0).map(Duration::from_secs_f64)
}

#[derive(Debug, Clone)]
pub struct ChatClient {
    http: reqwest::Client,
    url: String,
    cfg: ChatConfig,
    bucket: Option<Arc<TokenBucket>>,
}

impl ChatClient {
    pub fn new(http: reqwest::Client, cfg: ChatConfig) -> Self {
        let bucket = cfg.requests_per_second.map(|r| Arc::new(TokenBucket::new(r, r.ceil())));
        ChatClient { http, url: chat_url(&cfg.endpoint), cfg, bucket }
    }

    pub fn config(&self) -> &ChatConfig {
        &self.cfg
    }

    async fn attempt(&self, prompt: &str) -> Result<(String, Option<Usage>), LlmError> {
        if let Some(b) = &self.bucket {
            b.acquire().await;
        }
        let body = ChatRequest {
            model: &self.cfg.model,
            messages: vec![
                Message { role: "system", content: &self.cfg.system_prompt },
                Message { role: "user", content: prompt },
            ],
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
        };
        let mut req = self.http.post(&self.url).timeout(self.cfg.timeout).json(&body);
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let classify = |e: reqwest::Error| if e.is_timeout() { LlmError::Timeout } else { LlmError::Transport(e.to_string()) };
        let resp = req.send().await.map_err(classify)?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(LlmError::RateLimited { retry_after: retry_after(resp.headers()) });
        }
        let text = resp.text().await.map_err(classify)?;
        if status.is_server_error() {
            return Err(LlmError::Server { status: status.as_u16(), body: text });
        }
        if !status.is_success() {
            return Err(LlmError::Endpoint { status: status.as_u16(), body: text });
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| LlmError::Decode(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Decode("no choices[0].message.content".into()))?;
        Ok((content, parsed.usage))
    }

    /// Sends one prompt, retrying transport errors, timeouts, 429 and 5xx with
    /// exponential backoff. A 429 `Retry-After` is honored when longer.
    pub async fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let policy = self.cfg.retry;
        let max = policy.max_attempts.max(1);
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.attempt(prompt).await {
                Ok((text, usage)) => {
                    return Ok(Completion {
                        text,
                        latency_ms: started.elapsed().as_millis() as u64,
                        prompt_tokens: usage.as_ref().and_then(|u| u.prompt_tokens),
                        completion_tokens: usage.as_ref().and_then(|u| u.completion_tokens),
                        attempts: attempt,
                    })
                }
                Err(e) if e.is_retryable() => {
                    if attempt >= max {
                        return Err(LlmError::Exhausted { attempts: attempt, last: Box::new(e) });
                    }
                    let mut delay = policy.delay(attempt);
                    if let LlmError::RateLimited { retry_after: Some(ra) } = &e {
                        delay = delay.max((*ra).min(policy.max_delay));
                    }
                    tracing::debug!(attempt, error = %e, delay_ms = delay.as_millis() as u64, "retrying completion");
                    tokio::time::sleep(delay).await;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_from_base() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(1), Duration::from_secs(2));
        assert_eq!(p.delay(2), Duration::from_secs(4));
        assert_eq!(p.delay(3), Duration::from_secs(8));
        assert_eq!(p.delay(40), Duration::from_secs(60));
    }

    #[test]
    fn endpoint_forms() {
        assert_eq!(chat_url("http://h:1/v1"), "http://h:1/v1/chat/completions");
        assert_eq!(chat_url("http://h:1/v1/"), "http://h:1/v1/chat/completions");
        assert_eq!(chat_url("http://h:1/v1/chat/completions"), "http://h:1/v1/chat/completions");
    }

    #[test]
    fn retryability() {
        assert!(LlmError::Timeout.is_retryable());
        assert!(LlmError::RateLimited { retry_after: None }.is_retryable());
        assert!(LlmError::Server { status: 503, body: String::new() }.is_retryable());
        assert!(!LlmError::Endpoint { status: 400, body: String::new() }.is_retryable());
        assert!(!LlmError::Decode(String::new()).is_retryable());
    }

    #[tokio::test]
    async fn bucket_limits_rate() {
        let b = TokenBucket::new(50.0, 1.0);
        let t = Instant::now();
        for _ in 0..6 {
            b.acquire().await;
        }
        // one token up front, five more at 20 ms each
        assert!(t.elapsed() >= Duration::from_millis(90), "{:?}", t.elapsed());
    }
}
