//! One envelope protocol for every external model service, with
//! subprocess, HTTP and in-process mock transports.

mod client;
mod mock;
mod tasks;
mod transport;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use client::{Address, AdapterClient, Adapters, CallOptions, EndpointSpec, Transcript, TransportKind};
pub use mock::{mock_embedding, serve_mock_lines, MockBackend, MOCK_EMBED_DIM, MOCK_MAX_MUSIC_S, TTS_SECONDS_PER_CHAR};
pub use tasks::*;
pub use transport::{HttpTransport, MockTransport, SubprocessTransport, Transport};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdapterKind {
    Llm,
    TextEmbed,
    ImageEmbed,
    Asr,
    Vad,
    Tts,
    Music,
    VocalSeparate,
    Ocr,
}

impl AdapterKind {
    pub const ALL: [AdapterKind; 9] = [
        AdapterKind::Llm,
        AdapterKind::TextEmbed,
        AdapterKind::ImageEmbed,
        AdapterKind::Asr,
        AdapterKind::Vad,
        AdapterKind::Tts,
        AdapterKind::Music,
        AdapterKind::VocalSeparate,
        AdapterKind::Ocr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdapterKind::Llm => "llm",
            AdapterKind::TextEmbed => "text-embed",
            AdapterKind::ImageEmbed => "image-embed",
            AdapterKind::Asr => "asr",
            AdapterKind::Vad => "vad",
            AdapterKind::Tts => "tts",
            AdapterKind::Music => "music",
            AdapterKind::VocalSeparate => "vocal-separate",
            AdapterKind::Ocr => "ocr",
        }
    }
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdapterKind {
    type Err = AdapterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AdapterKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AdapterError::Manifest(format!("unknown adapter kind {s:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Capabilities {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_music_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub voices: Vec<String>,
    #[serde(default = "one")]
    pub max_concurrency: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub task: String,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn success(id: &str, payload: Value) -> Self {
        Response {
            id: id.to_string(),
            ok: true,
            payload: Some(payload),
            error: None,
        }
    }

    pub fn failure(id: &str, error: impl Into<String>) -> Self {
        Response {
            id: id.to_string(),
            ok: false,
            payload: None,
            error: Some(error.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandshakeRequest {
    pub protocol: u32,
    pub kind: AdapterKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandshakeResponse {
    pub protocol: u32,
    pub kind: AdapterKind,
    pub capabilities: Capabilities,
}

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("adapter manifest: {0}")]
    Manifest(String),

    #[error("no adapter configured for kind {0}")]
    Missing(AdapterKind),

    #[error("endpoint declared as {expected} but answered as {got}")]
    KindMismatch { expected: AdapterKind, got: AdapterKind },

    #[error("{kind} speaks protocol {got}, expected {PROTOCOL_VERSION}")]
    Version { kind: AdapterKind, got: u32 },

    #[error("{kind} endpoint unusable: {message}")]
    Transport { kind: AdapterKind, message: String },

    #[error("{task}: transport failed after {attempts} attempts: {message}")]
    Exhausted { task: String, attempts: u32, message: String },

    #[error("{task}: response field `{field}` invalid: {message}")]
    Schema { task: String, field: String, message: String },

    /// Error text returned by the adapter, passed through unchanged.
    #[error("{task}: {message}")]
    Reported { task: String, message: String },
}
