//! OpenAI-compatible chat completions backend.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatBackend, ChatCall, TransportError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_seconds: u64,
    /// Requests per minute across all islands; 0 disables the limit.
    pub requests_per_minute: u32,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "https://generativelanguage.googleapis.com/v1beta/openai".into(),
            api_key_env: "CODEVOLVE_API_KEY".into(),
            timeout_seconds: 600,
            requests_per_minute: 60,
            max_in_flight: 8,
        }
    }
}

struct Bucket {
    tokens: f64,
    last: Instant,
}

pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    bucket: Mutex<Bucket>,
    in_flight: Mutex<usize>,
    slot_free: Condvar,
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: HttpConfig) -> Self {
        let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_key(config, key)
    }

    pub fn with_key(config: HttpConfig, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_seconds.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let burst = config.requests_per_minute.max(1) as f64;
        HttpBackend {
            config,
            api_key,
            agent,
            bucket: Mutex::new(Bucket { tokens: burst, last: Instant::now() }),
            in_flight: Mutex::new(0),
            slot_free: Condvar::new(),
        }
    }

    fn take_token(&self) {
        let rpm = self.config.requests_per_minute;
        if rpm == 0 {
            return;
        }
        let rate = rpm as f64 / 60.0;
        loop {
            let wait = {
                let mut b = self.bucket.lock().unwrap();
                let now = Instant::now();
                b.tokens = (b.tokens + now.duration_since(b.last).as_secs_f64() * rate).min(rpm as f64);
                b.last = now;
                if b.tokens >= 1.0 {
                    b.tokens -= 1.0;
                    return;
                }
                (1.0 - b.tokens) / rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }

    fn acquire_slot(&self) -> SlotGuard<'_> {
        let cap = self.config.max_in_flight.max(1);
        let mut n = self.in_flight.lock().unwrap();
        while *n >= cap {
            n = self.slot_free.wait(n).unwrap();
        }
        *n += 1;
        SlotGuard(self)
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

struct SlotGuard<'a>(&'a HttpBackend);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.slot_free.notify_one();
    }
}

pub fn request_body(call: &ChatCall<'_>) -> Value {
    let mut body = json!({
        "model": call.model.name,
        "messages": call.messages,
        "temperature": call.model.temperature,
        "top_p": call.model.top_p,
    });
    if let Some(max) = call.model.max_output_tokens {
        body["max_tokens"] = json!(max);
    }
    body
}

/// Pulls `choices[0].message.content` out of a completion response.
pub fn extract_content(body: &Value) -> Result<String, TransportError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::retryable("response has no choices[0].message.content"))
}

impl ChatBackend for HttpBackend {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, TransportError> {
        let key = self
            .api_key
            .as_deref()
            .ok_or_else(|| TransportError::fatal(format!("{} is not set", self.config.api_key_env)))?;
        self.take_token();
        let _slot = self.acquire_slot();
        let mut resp = self
            .agent
            .post(&self.url())
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(request_body(call))
            .map_err(|e| TransportError::retryable(format!("request failed: {e}")))?;
        let status = resp.status().as_u16();
        let text =
            resp.body_mut().read_to_string().map_err(|e| TransportError::retryable(format!("reading body: {e}")))?;
        if status != 200 {
            let snippet: String = text.chars().take(300).collect();
            let msg = format!("HTTP {status}: {snippet}");
            return Err(if status == 429 || status >= 500 {
                TransportError::retryable(msg)
            } else {
                TransportError::fatal(msg)
            });
        }
        let body: Value =
            serde_json::from_str(&text).map_err(|e| TransportError::retryable(format!("bad JSON: {e}")))?;
        extract_content(&body)
    }
}
