//! Vision-language completion backends.
//!
//! [`VisionBackend`] is implemented by [`RemoteBackend`], an OpenAI-compatible
//! chat-completions client, and by [`MockBackend`], which replays a
//! [`MockScript`] deterministically. Both accept concurrent in-flight requests.

mod mock;
mod remote;
mod wire;

use std::fmt;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{CaseScript, Fault, FaultAction, MockBackend, MockScript, ScriptEntry};
pub use remote::{RemoteBackend, RetryPolicy, API_KEY_ENV};
pub use wire::{build_wire_request, build_wire_request_capped, SchemaDescriptor, WireRequest};

pub const DEFAULT_MODEL_ID: &str = "gpt-4o-2024-11-20";

/// Images above this size are refused before transmission.
pub const DEFAULT_IMAGE_CAP_BYTES: usize = 20 * 1024 * 1024;

/// Sampling parameters sent verbatim with every request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams { temperature: 0.2, top_p: 1.0, max_tokens: 2048, frequency_penalty: 0.0, presence_penalty: 0.0 }
    }
}

/// Which pipeline step issued a request. Mock scripts are keyed by this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// Initial structured generation and its feedback regenerations.
    StructuredGeneration,
    /// Tooth-number extraction and re-extraction.
    ToothExtraction,
    /// Finding generation and its feedback regenerations.
    FindingGeneration,
    /// Conversion of a finding back into structured data.
    Restructure,
    /// Single-shot chain-of-thought baseline.
    Cot,
}

impl StepKind {
    pub const ALL: [StepKind; 5] = [
        StepKind::StructuredGeneration,
        StepKind::ToothExtraction,
        StepKind::FindingGeneration,
        StepKind::Restructure,
        StepKind::Cot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::StructuredGeneration => "structured_generation",
            StepKind::ToothExtraction => "tooth_extraction",
            StepKind::FindingGeneration => "finding_generation",
            StepKind::Restructure => "restructure",
            StepKind::Cot => "cot",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Routing metadata. Not transmitted to remote services.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RequestTag {
    pub case_id: String,
    pub step: StepKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePayload {
    pub bytes: Vec<u8>,
    pub media_type: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResponseMode {
    FreeText,
    JsonConstrained(SchemaDescriptor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisionRequest {
    pub tag: RequestTag,
    pub system_text: String,
    pub user_text: String,
    pub image: Option<ImagePayload>,
    pub params: DecodingParams,
    pub response_mode: ResponseMode,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BackendMeta {
    pub request_id: Option<String>,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisionResponse {
    pub text: String,
    pub meta: BackendMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendErrorKind {
    Transport,
    Auth,
    RateLimited,
    EmptyResponse,
    ScriptExhausted,
    OversizedImage,
    Http,
}

impl BackendErrorKind {
    pub fn is_retryable(self) -> bool {
        matches!(self, BackendErrorKind::Transport | BackendErrorKind::RateLimited)
    }
}

impl fmt::Display for BackendErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BackendErrorKind::Transport => "transport error",
            BackendErrorKind::Auth => "authentication error",
            BackendErrorKind::RateLimited => "rate limited",
            BackendErrorKind::EmptyResponse => "empty response",
            BackendErrorKind::ScriptExhausted => "mock script exhausted",
            BackendErrorKind::OversizedImage => "oversized image",
            BackendErrorKind::Http => "http error",
        };
        f.write_str(s)
    }
}

/// A failed backend call. Kind plus message, so that failures recorded in a
/// transcript can be replayed verbatim by the mock.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind}: {message}")]
pub struct BackendError {
    pub kind: BackendErrorKind,
    pub message: String,
}

impl BackendError {
    pub fn new(kind: BackendErrorKind, message: impl Into<String>) -> Self {
        BackendError { kind, message: message.into() }
    }
}

#[async_trait]
pub trait VisionBackend: Send + Sync {
    async fn send(&self, request: &VisionRequest) -> Result<VisionResponse, BackendError>;

    /// Model identifier recorded in run manifests.
    fn model_id(&self) -> &str;
}

#[async_trait]
impl<B: VisionBackend + ?Sized> VisionBackend for std::sync::Arc<B> {
    async fn send(&self, request: &VisionRequest) -> Result<VisionResponse, BackendError> {
        (**self).send(request).await
    }

    fn model_id(&self) -> &str {
        (**self).model_id()
    }
}
