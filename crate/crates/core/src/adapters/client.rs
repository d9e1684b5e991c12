use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::tasks::{is_llm_task, Task};
use super::transport::{HttpTransport, MockTransport, SubprocessTransport, Transport};
use super::{
    AdapterError, AdapterKind, Capabilities, HandshakeRequest, HandshakeResponse, MockBackend, Request, Response,
    PROTOCOL_VERSION,
};
use crate::sync::FairSemaphore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    SubprocessLines,
    Http,
    /// The deterministic backend, run in-process.
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Address {
    Argv(Vec<String>),
    Text(String),
}

/// One manifest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSpec {
    pub transport: TransportKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<Address>,
    /// Environment variable whose value is sent as a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retries: Option<u32>,
}

impl EndpointSpec {
    pub fn mock(address: Option<PathBuf>) -> Self {
        EndpointSpec {
            transport: TransportKind::Mock,
            address: address.map(|p| Address::Text(p.to_string_lossy().into_owned())),
            token_env: None,
            timeout_s: None,
            retries: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallOptions {
    pub timeout: Duration,
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff: Duration,
}

impl Default for CallOptions {
    fn default() -> Self {
        CallOptions {
            timeout: Duration::from_secs(120),
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

/// Append-only JSON-lines log of every exchange. Occurrences of `root` in
/// the log are written as `$PROJECT` so runs in different directories
/// compare equal.
pub struct Transcript {
    file: Mutex<File>,
    root: Option<String>,
}

impl Transcript {
    pub fn create(path: &Path, root: Option<&Path>) -> crate::Result<Self> {
        let file = File::create(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(Transcript {
            file: Mutex::new(file),
            root: root.map(|r| r.to_string_lossy().into_owned()),
        })
    }

    fn record(&self, kind: AdapterKind, req: &Request, resp: &Response) {
        let mut line = json!({"kind": kind, "request": req, "response": resp}).to_string();
        if let Some(root) = &self.root {
            line = line.replace(root.as_str(), "$PROJECT");
        }
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = f.write_all(line.as_bytes()) {
            tracing::warn!(error = %e, "cannot append to adapter transcript");
        }
    }
}

/// A connected endpoint. Shareable across threads; calls beyond the
/// endpoint's declared concurrency wait in FIFO order.
pub struct AdapterClient {
    kind: AdapterKind,
    transport: Box<dyn Transport>,
    caps: Capabilities,
    slots: FairSemaphore,
    seq: AtomicU64,
    opts: CallOptions,
    transcript: Option<Arc<Transcript>>,
}

impl AdapterClient {
    /// Performs the handshake and caches the reported capabilities.
    pub fn connect(
        kind: AdapterKind,
        transport: Box<dyn Transport>,
        opts: CallOptions,
        transcript: Option<Arc<Transcript>>,
    ) -> Result<Self, AdapterError> {
        let mut client = AdapterClient {
            kind,
            transport,
            caps: Capabilities::default(),
            slots: FairSemaphore::new(1),
            seq: AtomicU64::new(0),
            opts,
            transcript,
        };
        let payload = serde_json::to_value(HandshakeRequest {
            protocol: PROTOCOL_VERSION,
            kind,
        })
        .expect("serializable");
        let raw = client.call_raw("handshake", payload).map_err(|e| match e {
            AdapterError::Exhausted { message, .. } | AdapterError::Reported { message, .. } => {
                AdapterError::Transport { kind, message }
            }
            other => other,
        })?;
        let hs: HandshakeResponse = serde_path_to_error::deserialize(&raw).map_err(|e| AdapterError::Schema {
            task: "handshake".into(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if hs.kind != kind {
            return Err(AdapterError::KindMismatch { expected: kind, got: hs.kind });
        }
        if hs.protocol != PROTOCOL_VERSION {
            return Err(AdapterError::Version { kind, got: hs.protocol });
        }
        if matches!(kind, AdapterKind::TextEmbed | AdapterKind::ImageEmbed) && hs.capabilities.embedding_dim.unwrap_or(0) == 0 {
            return Err(AdapterError::Schema {
                task: "handshake".into(),
                field: "capabilities.embedding_dim".into(),
                message: "embedding endpoints must declare a positive dimension".into(),
            });
        }
        client.slots = FairSemaphore::new(hs.capabilities.max_concurrency.max(1));
        client.caps = hs.capabilities;
        Ok(client)
    }

    pub fn kind(&self) -> AdapterKind {
        self.kind
    }

    pub fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    /// Validated typed call. Free-text tasks get one repair re-request when
    /// the response breaks the schema.
    pub fn call<T: Task>(&self, req: &T) -> Result<T::Response, AdapterError> {
        if T::KIND != self.kind {
            return Err(AdapterError::KindMismatch {
                expected: T::KIND,
                got: self.kind,
            });
        }
        let mut payload = serde_json::to_value(req).expect("task payloads serialize");
        let mut repaired = false;
        loop {
            let raw = self.call_raw(T::NAME, payload.clone())?;
            let violation = match serde_path_to_error::deserialize::<_, T::Response>(&raw) {
                Ok(resp) => match req.check(&resp, &self.caps) {
                    Ok(()) => return Ok(resp),
                    Err(v) => (v.field, v.message),
                },
                Err(e) => (e.path().to_string(), e.inner().to_string()),
            };
            if is_llm_task(T::NAME) && !repaired {
                tracing::warn!(task = T::NAME, field = %violation.0, "response failed validation, requesting repair");
                payload["repair"] = Value::String(format!("field `{}`: {}", violation.0, violation.1));
                repaired = true;
                continue;
            }
            return Err(AdapterError::Schema {
                task: T::NAME.into(),
                field: violation.0,
                message: violation.1,
            });
        }
    }

    /// Envelope round trip with retries on transport failure.
    pub fn call_raw(&self, task: &str, payload: Value) -> Result<Value, AdapterError> {
        let _permit = self.slots.acquire();
        let n = self.seq.fetch_add(1, Ordering::SeqCst);
        let req = Request {
            id: format!("{}-{n:06}", self.kind),
            task: task.to_string(),
            payload,
        };
        let mut last = String::new();
        for attempt in 0..=self.opts.retries {
            if attempt > 0 {
                std::thread::sleep(self.opts.backoff * 2u32.pow(attempt - 1));
            }
            match self.transport.exchange(&req, self.opts.timeout) {
                Ok(resp) => {
                    if let Some(t) = &self.transcript {
                        t.record(self.kind, &req, &resp);
                    }
                    return match (resp.ok, resp.payload, resp.error) {
                        (true, Some(p), None) => Ok(p),
                        (false, None, Some(e)) => Err(AdapterError::Reported {
                            task: task.into(),
                            message: e,
                        }),
                        _ => Err(AdapterError::Schema {
                            task: task.into(),
                            field: "payload".into(),
                            message: "envelope must carry exactly one of payload or error".into(),
                        }),
                    };
                }
                Err(e) => {
                    tracing::warn!(task, attempt, error = %e, "adapter transport failure");
                    last = e;
                }
            }
        }
        Err(AdapterError::Exhausted {
            task: task.into(),
            attempts: self.opts.retries + 1,
            message: last,
        })
    }
}

/// Connected endpoints keyed by kind.
#[derive(Default)]
pub struct Adapters {
    clients: BTreeMap<AdapterKind, Arc<AdapterClient>>,
}

impl Adapters {
    /// Reads `adapters.json` and connects every listed endpoint. Relative
    /// mock addresses resolve against the manifest's directory.
    pub fn load_manifest(path: &Path, seed: u64, transcript: Option<Arc<Transcript>>) -> Result<Self, AdapterError> {
        let text = std::fs::read_to_string(path).map_err(|e| AdapterError::Manifest(format!("{}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let raw: BTreeMap<String, EndpointSpec> = serde_path_to_error::deserialize(de)
            .map_err(|e| AdapterError::Manifest(format!("{}: at {}: {}", path.display(), e.path(), e.inner())))?;
        let specs = raw
            .into_iter()
            .map(|(k, v)| Ok((k.parse::<AdapterKind>()?, v)))
            .collect::<Result<BTreeMap<_, _>, AdapterError>>()?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_specs(&specs, base, seed, transcript)
    }

    pub fn from_specs(
        specs: &BTreeMap<AdapterKind, EndpointSpec>,
        base: &Path,
        seed: u64,
        transcript: Option<Arc<Transcript>>,
    ) -> Result<Self, AdapterError> {
        let mut out = Adapters::default();
        for (&kind, spec) in specs {
            let mut opts = CallOptions::default();
            if let Some(t) = spec.timeout_s {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(AdapterError::Manifest(format!("{kind}: timeout_s must be positive")));
                }
                opts.timeout = Duration::from_secs_f64(t);
            }
            if let Some(r) = spec.retries {
                opts.retries = r;
            }
            let transport = build_transport(kind, spec, base, seed)?;
            out.insert(AdapterClient::connect(kind, transport, opts, transcript.clone())?);
        }
        Ok(out)
    }

    /// Every kind served by the in-process mock. `cue_dir` feeds asr and vad.
    pub fn mock(cue_dir: Option<&Path>, seed: u64, transcript: Option<Arc<Transcript>>) -> Self {
        let mut out = Adapters::default();
        for kind in AdapterKind::ALL {
            let backend = MockBackend::new(kind, seed, cue_dir.map(Path::to_path_buf));
            let client = AdapterClient::connect(kind, Box::new(MockTransport(backend)), CallOptions::default(), transcript.clone())
                .expect("mock handshake cannot fail");
            out.insert(client);
        }
        out
    }

    pub fn insert(&mut self, client: AdapterClient) {
        self.clients.insert(client.kind(), Arc::new(client));
    }

    pub fn get(&self, kind: AdapterKind) -> Result<&AdapterClient, AdapterError> {
        self.clients.get(&kind).map(Arc::as_ref).ok_or(AdapterError::Missing(kind))
    }

    pub fn kinds(&self) -> impl Iterator<Item = AdapterKind> + '_ {
        self.clients.keys().copied()
    }
}

fn build_transport(kind: AdapterKind, spec: &EndpointSpec, base: &Path, seed: u64) -> Result<Box<dyn Transport>, AdapterError> {
    let text = |a: &Option<Address>| match a {
        Some(Address::Text(s)) => Some(s.clone()),
        Some(Address::Argv(v)) => Some(v.join(" ")),
        None => None,
    };
    match spec.transport {
        TransportKind::Mock => {
            let dir = text(&spec.address).map(|s| base.join(s));
            Ok(Box::new(MockTransport(MockBackend::new(kind, seed, dir))))
        }
        TransportKind::SubprocessLines => {
            let argv = match &spec.address {
                Some(Address::Argv(v)) => v.clone(),
                Some(Address::Text(s)) => s.split_whitespace().map(String::from).collect(),
                None => Vec::new(),
            };
            if argv.is_empty() {
                return Err(AdapterError::Manifest(format!("{kind}: subprocess-lines needs a command")));
            }
            Ok(Box::new(SubprocessTransport::new(argv)))
        }
        TransportKind::Http => {
            let url = text(&spec.address).ok_or_else(|| AdapterError::Manifest(format!("{kind}: http needs a URL")))?;
            let token = match &spec.token_env {
                Some(var) => Some(
                    std::env::var(var).map_err(|_| AdapterError::Manifest(format!("{kind}: token variable {var} is not set")))?,
                ),
                None => None,
            };
            Ok(Box::new(HttpTransport::new(&url, token)))
        }
    }
}
