//! The generation engine: a weighted ensemble of chat models behind a
//! pluggable backend, plus the meta-prompting model.

pub mod http;
pub mod replay;
pub mod template;

use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sandbox::CandidateLanguage;

pub use http::{HttpBackend, HttpConfig};
pub use replay::{ReplayBackend, TranscriptRecord};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: String) -> Self {
        ChatMessage { role: Role::System, content }
    }

    pub fn user(content: String) -> Self {
        ChatMessage { role: Role::User, content }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub name: String,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
}

impl ModelParams {
    pub fn new(name: &str) -> Self {
        ModelParams { name: name.into(), temperature: 0.7, top_p: 0.95, max_output_tokens: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    #[serde(flatten)]
    pub model: ModelParams,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before attempt `i + 1`; the last entry repeats.
    pub backoff_ms: Vec<u64>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, backoff_ms: vec![1000, 4000, 16000] }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy { max_attempts, backoff_ms: vec![] }
    }

    fn delay(&self, attempt: usize) -> Duration {
        let ms = self.backoff_ms.get(attempt).or(self.backoff_ms.last()).copied().unwrap_or(0);
        Duration::from_millis(ms)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub members: Vec<EnsembleMember>,
    pub meta_model: ModelParams,
    pub retry: RetryPolicy,
}

impl Default for EnsembleConfig {
    /// Fast model 80% of the time, strong model 20%; the meta-prompter uses
    /// the fast model's settings.
    fn default() -> Self {
        EnsembleConfig {
            members: vec![
                EnsembleMember { model: ModelParams::new("gemini-2.5-flash"), weight: 0.8 },
                EnsembleMember { model: ModelParams::new("gemini-2.5-pro"), weight: 0.2 },
            ],
            meta_model: ModelParams::new("gemini-2.5-flash"),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("ensemble has no members")]
    NoMembers,
    #[error("ensemble weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("model {0}: {1}")]
    BadModel(String, &'static str),
    #[error("retry policy needs at least one attempt")]
    NoAttempts,
}

impl EnsembleConfig {
    pub fn single(model: ModelParams) -> Self {
        EnsembleConfig {
            members: vec![EnsembleMember { model: model.clone(), weight: 1.0 }],
            meta_model: model,
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.members.is_empty() {
            return Err(ConfigError::NoMembers);
        }
        let sum: f64 = self.members.iter().map(|m| m.weight).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::WeightSum(sum));
        }
        for m in &self.members {
            if !(0.0..=1.0).contains(&m.weight) {
                return Err(ConfigError::BadModel(m.model.name.clone(), "weight outside [0, 1]"));
            }
        }
        for p in self.members.iter().map(|m| &m.model).chain([&self.meta_model]) {
            if p.temperature.is_nan() || p.temperature < 0.0 {
                return Err(ConfigError::BadModel(p.name.clone(), "negative temperature"));
            }
            if !(p.top_p > 0.0 && p.top_p <= 1.0) {
                return Err(ConfigError::BadModel(p.name.clone(), "top_p outside (0, 1]"));
            }
        }
        if self.retry.max_attempts == 0 {
            return Err(ConfigError::NoAttempts);
        }
        Ok(())
    }
}

/// Picks an ensemble member with probability equal to its weight.
pub fn sample_model<'a, R: Rng + ?Sized>(config: &'a EnsembleConfig, rng: &mut R) -> &'a ModelParams {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for m in &config.members {
        acc += m.weight;
        if u < acc {
            return &m.model;
        }
    }
    &config.members.last().expect("validated ensemble is non-empty").model
}

/// Everything the ensemble sees when producing a child program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt_text: String,
    pub parent_code: String,
    /// Nearest ancestor first.
    pub ancestor_codes: Vec<String>,
    pub inspiration_codes: Vec<String>,
    pub execution_feedback: Option<String>,
    pub problem_brief: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransportError {
    pub message: String,
    /// Whether another attempt could succeed.
    pub retryable: bool,
}

impl TransportError {
    pub fn retryable(message: impl Into<String>) -> Self {
        TransportError { message: message.into(), retryable: true }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        TransportError { message: message.into(), retryable: false }
    }
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// One logical model call. `index` counts calls per island and is stable
/// across retries.
#[derive(Clone, Debug)]
pub struct ChatCall<'a> {
    pub island: usize,
    pub index: u64,
    pub model: &'a ModelParams,
    pub messages: &'a [ChatMessage],
    pub digest: &'a str,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, TransportError>;
}

impl<F> ChatBackend for F
where
    F: Fn(&ChatCall<'_>) -> Result<String, TransportError> + Send + Sync,
{
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, TransportError> {
        self(call)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LlmError {
    #[error("model call failed after {attempts} attempt(s): {last}")]
    Transport { attempts: u32, last: String },
    #[error("model returned an empty response")]
    EmptyResponse,
    #[error("invalid request: {0}")]
    InvalidRequest(&'static str),
}

/// Stable digest of what was sent: model settings plus messages.
pub fn request_digest(model: &ModelParams, messages: &[ChatMessage]) -> String {
    let payload = serde_json::json!({
        "model": model.name,
        "temperature": model.temperature,
        "top_p": model.top_p,
        "max_output_tokens": model.max_output_tokens,
        "messages": messages,
    });
    hex::encode(Sha256::digest(payload.to_string().as_bytes()))
}

/// A completed call, kept for the run transcript.
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub island: usize,
    pub index: u64,
    pub model: String,
    pub digest: String,
    pub response: String,
}

pub struct Ensemble {
    pub config: EnsembleConfig,
    pub language: CandidateLanguage,
    backend: Arc<dyn ChatBackend>,
}

impl Ensemble {
    pub fn new(config: EnsembleConfig, language: CandidateLanguage, backend: Arc<dyn ChatBackend>) -> Self {
        Ensemble { config, language, backend }
    }

    fn call(
        &self,
        island: usize,
        index: u64,
        model: &ModelParams,
        messages: &[ChatMessage],
    ) -> Result<Completion, LlmError> {
        let digest = request_digest(model, messages);
        let call = ChatCall { island, index, model, messages, digest: &digest };
        let max = self.config.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.backend.complete(&call) {
                Ok(response) => {
                    return Ok(Completion { island, index, model: model.name.clone(), digest, response });
                }
                Err(e) if e.retryable && attempt < max => {
                    log::warn!("island {island} call {index} attempt {attempt} failed: {e}");
                    std::thread::sleep(self.config.retry.delay(attempt as usize - 1));
                }
                Err(e) => return Err(LlmError::Transport { attempts: attempt, last: e.message }),
            }
        }
    }

    /// Samples a member and asks it for an edited program. Returns the raw text.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        request: &GenerationRequest,
        island: usize,
        index: u64,
        rng: &mut R,
    ) -> Result<Completion, LlmError> {
        if request.prompt_text.trim().is_empty() {
            return Err(LlmError::InvalidRequest("empty prompt"));
        }
        let model = sample_model(&self.config, rng).clone();
        let messages = template::generation_messages(request, self.language);
        self.call(island, index, &model, &messages)
    }

    /// Asks the meta model to rewrite `prompt` given the program it produced.
    pub fn meta_prompt(
        &self,
        problem_brief: &str,
        prompt: &str,
        code: &str,
        island: usize,
        index: u64,
    ) -> Result<Completion, LlmError> {
        if prompt.trim().is_empty() || code.trim().is_empty() {
            return Err(LlmError::InvalidRequest("meta-prompting needs a prompt and a program"));
        }
        let messages = template::meta_messages(problem_brief, prompt, code, self.language);
        let mut out = self.call(island, index, &self.config.meta_model.clone(), &messages)?;
        let text = out.response.trim();
        if text.is_empty() {
            return Err(LlmError::EmptyResponse);
        }
        out.response = text.to_string();
        Ok(out)
    }
}
