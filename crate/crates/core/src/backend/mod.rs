//! The LLM seen by the detector: text generation for the prompting path and
//! a pooled hidden state for the classifier path.

mod mock;

use alloc::string::String;
use alloc::vec::Vec;
use core::time::Duration;

use serde::{Deserialize, Serialize};

pub use mock::{parse_rendered, EmbeddingLayout, MockBackend, MockOptions, RenderedParts};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure: {message}")]
    Transport { message: String, retryable: bool },
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("protocol error (status {status}): {body}")]
    Protocol { status: u16, body: String },
    #[error("invalid backend input: {0}")]
    Validation(String),
    #[error("backend does not support {0}")]
    Unsupported(&'static str),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::Transport {
                retryable: true,
                ..
            } | BackendError::Timeout(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Mock,
}

/// How the remote side summarises the last hidden layer into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    #[default]
    LastToken,
    Mean,
}

impl Pooling {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pooling::LastToken => "last-token",
            Pooling::Mean => "mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: Option<String>,
    pub model_name: Option<String>,
    pub temperature: f64,
    pub max_new_tokens: usize,
    pub embedding_dim: usize,
    #[serde(with = "duration_ms")]
    pub request_timeout: Duration,
    pub max_in_flight: usize,
    pub pooling: Pooling,
    /// Label assigned when an answer cannot be parsed.
    pub fallback_label: u8,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint_url: None,
            model_name: None,
            temperature: 0.0,
            max_new_tokens: 64,
            embedding_dim: 4096,
            request_timeout: Duration::from_secs(60),
            max_in_flight: 4,
            pooling: Pooling::LastToken,
            fallback_label: 1,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let invalid = |m: &str| Err(BackendError::Validation(m.into()));
        if self.embedding_dim == 0 {
            return invalid("embedding_dim must be positive");
        }
        if self.max_new_tokens == 0 {
            return invalid("max_new_tokens must be positive");
        }
        if self.max_in_flight == 0 {
            return invalid("max_in_flight must be positive");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return invalid("temperature must be non-negative");
        }
        if self.fallback_label > 1 {
            return invalid("fallback_label must be 0 or 1");
        }
        if self.kind == BackendKind::Remote && self.endpoint_url.is_none() {
            return invalid("remote backend needs an endpoint URL");
        }
        Ok(())
    }
}

mod duration_ms {
    use core::time::Duration;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

pub trait Backend {
    /// Raw completion for `prompt`.
    fn generate(&self, prompt: &str) -> Result<String, BackendError>;

    /// Pooled last-layer state for `prompt`, of length `embedding_dim()`.
    fn embed(&self, prompt: &str) -> Result<Vec<f64>, BackendError>;

    fn embedding_dim(&self) -> usize;

    /// Short description recorded in run manifests.
    fn identity(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAnswer {
    pub label: u8,
    pub was_fallback: bool,
    pub raw_text: String,
}

/// Reads a binary label from the last non-empty line of a completion.
///
/// The line is trimmed of whitespace and of one pair of matching quotes. If
/// what remains is not exactly `0` or `1` the answer is treated as
/// device-directed and flagged as a fallback.
pub fn parse_answer(raw: &str) -> ParsedAnswer {
    parse_answer_with_fallback(raw, 1)
}

pub fn parse_answer_with_fallback(raw: &str, fallback_label: u8) -> ParsedAnswer {
    let last = raw
        .lines()
        .map(str::trim)
        .rfind(|l| !l.is_empty())
        .unwrap_or("");
    let label = match strip_quotes(last) {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    };
    ParsedAnswer {
        label: label.unwrap_or(fallback_label),
        was_fallback: label.is_none(),
        raw_text: String::from(raw),
    }
}

fn strip_quotes(s: &str) -> &str {
    for (open, close) in [('"', '"'), ('\'', '\''), ('`', '`'), ('`', '\''), ('“', '”'), ('‘', '’')] {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return inner.trim();
        }
    }
    s
}
