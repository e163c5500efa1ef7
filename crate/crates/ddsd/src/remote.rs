//! HTTP client for a served LLM, plus order-preserving request fan-out.
//!
//! Wire protocol, JSON over HTTP:
//!
//! * `POST {endpoint}/generate` with `{prompt, model, temperature, max_new_tokens}`
//!   answers `{text}`.
//! * `POST {endpoint}/embed` with `{prompt, model, pooling}` answers `{vector}`.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use ddsd_core::backend::{Backend, BackendConfig, BackendError, BackendKind};
use serde::{Deserialize, Serialize};

pub const ENV_ENDPOINT: &str = "DDSD_ENDPOINT";
pub const ENV_MODEL: &str = "DDSD_MODEL";

const BODY_EXCERPT: usize = 200;

/// Reads a backend config from an optional TOML file, then applies
/// `DDSD_ENDPOINT` / `DDSD_MODEL` from the environment. An endpoint from the
/// environment selects the remote backend.
pub fn load_config(path: Option<&Path>) -> anyhow::Result<BackendConfig> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?
        }
        None => BackendConfig::default(),
    };
    if let Ok(url) = std::env::var(ENV_ENDPOINT) {
        if !url.is_empty() {
            config.endpoint_url = Some(url);
            config.kind = BackendKind::Remote;
        }
    }
    if let Ok(model) = std::env::var(ENV_MODEL) {
        if !model.is_empty() {
            config.model_name = Some(model);
        }
    }
    Ok(config)
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    model: Option<&'a str>,
    temperature: f64,
    max_new_tokens: usize,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    prompt: &'a str,
    model: Option<&'a str>,
    pooling: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

#[derive(Debug)]
pub struct RemoteBackend {
    config: BackendConfig,
    base: String,
    client: reqwest::blocking::Client,
    max_retries: usize,
}

impl RemoteBackend {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let base = config
            .endpoint_url
            .clone()
            .ok_or_else(|| BackendError::Validation("remote backend needs an endpoint URL".into()))?
            .trim_end_matches('/')
            .to_string();
        let client = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| BackendError::Transport {
                message: e.to_string(),
                retryable: false,
            })?;
        Ok(RemoteBackend {
            config,
            base,
            client,
            max_retries: 2,
        })
    }

    /// Extra attempts after a retryable failure.
    pub fn with_max_retries(mut self, n: usize) -> Self {
        self.max_retries = n;
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        route: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let mut attempt = 0;
        loop {
            match self.post_once(route, body) {
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    attempt += 1;
                    thread::sleep(Duration::from_millis(50 * attempt as u64));
                }
                other => return other,
            }
        }
    }

    fn post_once<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        route: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let url = format!("{}/{route}", self.base);
        let resp = self.client.post(&url).json(body).send().map_err(|e| self.transport(e))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| self.transport(e))?;
        if !status.is_success() {
            return Err(BackendError::Protocol {
                status: status.as_u16(),
                body: excerpt(&text),
            });
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Protocol {
            status: status.as_u16(),
            body: format!("undecodable response ({e}): {}", excerpt(&text)),
        })
    }

    fn transport(&self, e: reqwest::Error) -> BackendError {
        if e.is_timeout() {
            BackendError::Timeout(self.config.request_timeout)
        } else {
            BackendError::Transport {
                message: e.to_string(),
                retryable: e.is_connect() || e.is_request() || e.is_body(),
            }
        }
    }
}

fn excerpt(text: &str) -> String {
    match text.char_indices().nth(BODY_EXCERPT) {
        Some((i, _)) => format!("{}...", &text[..i]),
        None => text.to_string(),
    }
}

impl Backend for RemoteBackend {
    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::Validation("empty prompt".into()));
        }
        let req = GenerateRequest {
            prompt,
            model: self.config.model_name.as_deref(),
            temperature: self.config.temperature,
            max_new_tokens: self.config.max_new_tokens,
        };
        self.post::<_, GenerateResponse>("generate", &req).map(|r| r.text)
    }

    fn embed(&self, prompt: &str) -> Result<Vec<f64>, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::Validation("empty prompt".into()));
        }
        let req = EmbedRequest {
            prompt,
            model: self.config.model_name.as_deref(),
            pooling: self.config.pooling.as_str(),
        };
        let v = self.post::<_, EmbedResponse>("embed", &req)?.vector;
        if v.len() != self.config.embedding_dim {
            return Err(BackendError::Protocol {
                status: 200,
                body: format!("expected {} dims, got {}", self.config.embedding_dim, v.len()),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(BackendError::Protocol {
                status: 200,
                body: "embedding contains non-finite values".into(),
            });
        }
        Ok(v)
    }

    fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    fn identity(&self) -> String {
        format!(
            "remote(endpoint={}, model={}, temperature={}, pooling={})",
            self.base,
            self.config.model_name.as_deref().unwrap_or("-"),
            self.config.temperature,
            self.config.pooling.as_str()
        )
    }
}

/// Applies `f` to every item with at most `max_in_flight` calls running at
/// once. Results come back in input order.
pub fn fan_out<I, T, F>(items: &[I], max_in_flight: usize, f: F) -> Vec<Result<T, BackendError>>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> Result<T, BackendError> + Sync,
{
    let workers = max_in_flight.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T, BackendError>>>> =
        Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}
