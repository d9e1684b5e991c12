use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::{MockBackend, Request, Response};

/// A single request/response exchange. An `Err` is a transport failure and
/// may be retried; adapter-level errors come back as `Response { ok: false }`.
pub trait Transport: Send + Sync {
    fn exchange(&self, request: &Request, timeout: Duration) -> Result<Response, String>;
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Running {
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Newline-delimited JSON over the stdin/stdout of a long-lived process.
///
/// The process is spawned on first use and respawned after a timeout or
/// exit. Exchanges are serialized; lines carrying a stale id are skipped.
pub struct SubprocessTransport {
    argv: Vec<String>,
    running: Mutex<Option<Running>>,
}

impl SubprocessTransport {
    pub fn new(argv: Vec<String>) -> Self {
        SubprocessTransport {
            argv,
            running: Mutex::new(None),
        }
    }

    fn spawn(&self) -> Result<Running, String> {
        let (program, args) = self.argv.split_first().ok_or("empty adapter command")?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| format!("cannot start {program}: {e}"))?;
        let stdin = child.stdin.take().ok_or("no stdin")?;
        let stdout = child.stdout.take().ok_or("no stdout")?;
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Running {
            child,
            stdin,
            lines: rx,
        })
    }
}

impl Transport for SubprocessTransport {
    fn exchange(&self, request: &Request, timeout: Duration) -> Result<Response, String> {
        let mut guard = self.running.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let running = guard.as_mut().expect("spawned above");
        let mut line = serde_json::to_string(request).map_err(|e| e.to_string())?;
        line.push('\n');
        if let Err(e) = running.stdin.write_all(line.as_bytes()).and_then(|_| running.stdin.flush()) {
            guard.take().map(Running::kill);
            return Err(format!("write to adapter failed: {e}"));
        }
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match running.lines.recv_timeout(left) {
                Ok(text) => match serde_json::from_str::<Response>(&text) {
                    Ok(r) if r.id == request.id => return Ok(r),
                    Ok(r) => tracing::debug!(stale = %r.id, "skipping response for another request"),
                    Err(e) => {
                        guard.take().map(Running::kill);
                        return Err(format!("malformed envelope: {e}"));
                    }
                },
                Err(RecvTimeoutError::Timeout) => {
                    guard.take().map(Running::kill);
                    return Err(format!("no response within {:.1} s", timeout.as_secs_f64()));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    guard.take().map(Running::kill);
                    return Err("adapter process exited".into());
                }
            }
        }
    }
}

impl Drop for SubprocessTransport {
    fn drop(&mut self) {
        if let Some(r) = self.running.get_mut().ok().and_then(Option::take) {
            r.kill();
        }
    }
}

/// `POST {base}/v1/call` with the envelope as the JSON body.
pub struct HttpTransport {
    url: String,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(base: &str, token: Option<String>) -> Self {
        HttpTransport {
            url: format!("{}/v1/call", base.trim_end_matches('/')),
            token,
        }
    }
}

impl Transport for HttpTransport {
    fn exchange(&self, request: &Request, timeout: Duration) -> Result<Response, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut call = agent.post(&self.url);
        if let Some(t) = &self.token {
            call = call.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = call.send_json(request).map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("HTTP {}", resp.status()));
        }
        let r: Response = resp.body_mut().read_json().map_err(|e| format!("malformed envelope: {e}"))?;
        if r.id != request.id {
            return Err(format!("response id {} does not match request {}", r.id, request.id));
        }
        Ok(r)
    }
}

/// Calls a [`MockBackend`] in-process.
pub struct MockTransport(pub MockBackend);

impl Transport for MockTransport {
    fn exchange(&self, request: &Request, _timeout: Duration) -> Result<Response, String> {
        Ok(self.0.respond(request))
    }
}
