//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use async_trait::async_trait;
use reqwest::StatusCode;
use serde::Deserialize;
use tracing::{debug, warn};

use super::{
    build_wire_request_capped, BackendError, BackendErrorKind, BackendMeta, VisionBackend, VisionRequest,
    VisionResponse, DEFAULT_IMAGE_CAP_BYTES,
};

/// The only place the credential is read from.
pub const API_KEY_ENV: &str = "SLSO_API_KEY";

/// Bounded exponential backoff for transport and rate-limit failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(8) }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, where `attempt` starts at 1.
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

pub struct RemoteBackend {
    client: reqwest::Client,
    url: String,
    api_key: Option<String>,
    model_id: String,
    retry: RetryPolicy,
    image_cap_bytes: usize,
}

impl RemoteBackend {
    /// `endpoint` is either a full `.../chat/completions` URL or a base URL
    /// (with or without a trailing `/v1`).
    pub fn new(endpoint: &str, model_id: &str, api_key: Option<String>) -> Self {
        let client = reqwest::Client::builder().timeout(Duration::from_secs(120)).build().expect("http client builds");
        RemoteBackend {
            client,
            url: chat_completions_url(endpoint),
            api_key: api_key.filter(|k| !k.trim().is_empty()),
            model_id: model_id.to_string(),
            retry: RetryPolicy::default(),
            image_cap_bytes: DEFAULT_IMAGE_CAP_BYTES,
        }
    }

    /// Reads the credential from `SLSO_API_KEY`.
    pub fn from_env(endpoint: &str, model_id: &str) -> Self {
        Self::new(endpoint, model_id, std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_image_cap(mut self, bytes: usize) -> Self {
        self.image_cap_bytes = bytes;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn has_credential(&self) -> bool {
        self.api_key.is_some()
    }

    async fn attempt(&self, body: &str, key: &str) -> Result<VisionResponse, BackendError> {
        let response = self
            .client
            .post(&self.url)
            .bearer_auth(key)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send()
            .await
            .map_err(|e| BackendError::new(BackendErrorKind::Transport, e.to_string()))?;

        let status = response.status();
        let text = response.text().await.map_err(|e| BackendError::new(BackendErrorKind::Transport, e.to_string()))?;
        if !status.is_success() {
            return Err(classify_status(status, &text));
        }
        parse_completion(&text)
    }
}

#[async_trait]
impl VisionBackend for RemoteBackend {
    async fn send(&self, request: &VisionRequest) -> Result<VisionResponse, BackendError> {
        let Some(key) = self.api_key.as_deref() else {
            return Err(BackendError::new(BackendErrorKind::Auth, format!("{API_KEY_ENV} is not set")));
        };
        let body = build_wire_request_capped(request, &self.model_id, self.image_cap_bytes)?.to_json();

        let mut attempt = 1;
        loop {
            match self.attempt(&body, key).await {
                Ok(response) => return Ok(response),
                Err(err) if err.kind.is_retryable() && attempt < self.retry.max_attempts => {
                    let delay = self.retry.delay_after(attempt);
                    warn!(step = %request.tag.step, attempt, ?delay, "retrying after {err}");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
                Err(err) => {
                    debug!(step = %request.tag.step, attempt, "giving up: {err}");
                    return Err(err);
                }
            }
        }
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }
}

fn chat_completions_url(endpoint: &str) -> String {
    let trimmed = endpoint.trim().trim_end_matches('/');
    if trimmed.ends_with("/chat/completions") {
        trimmed.to_string()
    } else if trimmed.ends_with("/v1") {
        format!("{trimmed}/chat/completions")
    } else {
        format!("{trimmed}/v1/chat/completions")
    }
}

fn classify_status(status: StatusCode, body: &str) -> BackendError {
    let snippet: String = body.chars().take(200).collect();
    let kind = match status {
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => BackendErrorKind::Auth,
        StatusCode::TOO_MANY_REQUESTS => BackendErrorKind::RateLimited,
        s if s.is_server_error() => BackendErrorKind::Transport,
        _ => BackendErrorKind::Http,
    };
    BackendError::new(kind, format!("HTTP {}: {snippet}", status.as_u16()))
}

#[derive(Deserialize)]
struct Completion {
    id: Option<String>,
    #[serde(default)]
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
    refusal: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

fn parse_completion(body: &str) -> Result<VisionResponse, BackendError> {
    let completion: Completion = serde_json::from_str(body)
        .map_err(|e| BackendError::new(BackendErrorKind::Http, format!("unparseable completion: {e}")))?;
    let text = completion
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content.or(c.message.refusal))
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| BackendError::new(BackendErrorKind::EmptyResponse, "no message content"))?;
    Ok(VisionResponse {
        text,
        meta: BackendMeta {
            request_id: completion.id,
            prompt_tokens: completion.usage.as_ref().and_then(|u| u.prompt_tokens),
            completion_tokens: completion.usage.as_ref().and_then(|u| u.completion_tokens),
        },
    })
}
