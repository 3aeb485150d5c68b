use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use super::wire::{decode_response, WireRequest};
use super::{Backend, Candidate, InferenceError, InferenceRequest};
use crate::assertion::PredicateRegistry;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Client for the HTTP binding: `POST {base}/infer`.
pub struct HttpBackend {
    url: String,
    reg: PredicateRegistry,
    timeout: Duration,
    agent: ureq::Agent,
    /// Candidates dropped as invalid by the last call.
    pub last_warnings: Mutex<usize>,
}

impl HttpBackend {
    pub fn new(base: &str, reg: PredicateRegistry, timeout: Duration) -> Self {
        let base = base.trim_end_matches('/');
        let url = if base.ends_with("/infer") { base.to_string() } else { format!("{base}/infer") };
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpBackend { url, reg, timeout, agent, last_warnings: Mutex::new(0) }
    }

    fn map_err(&self, e: ureq::Error) -> InferenceError {
        match e {
            ureq::Error::Timeout(_) => InferenceError::Timeout(self.timeout.as_millis() as u64),
            ureq::Error::StatusCode(c) => InferenceError::Malformed(format!("HTTP status {c}")),
            other => InferenceError::Connection(other.to_string()),
        }
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> String {
        format!("remote {}", self.url)
    }

    fn infer(&self, req: &InferenceRequest) -> Result<Vec<Candidate>, InferenceError> {
        let body = WireRequest::from_request(req).to_json();
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(&body)
            .map_err(|e| self.map_err(e))?;
        let text = resp.body_mut().read_to_string().map_err(|e| self.map_err(e))?;
        let decoded = decode_response(&text, &self.reg)?;
        *self.last_warnings.lock().unwrap() = decoded.warnings;
        Ok(decoded.candidates)
    }
}

struct Proc {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

/// Client for the subprocess binding: one request per line on the child's
/// stdin, one response per line on its stdout. The child is started on
/// first use and restarted after a timeout.
pub struct SubprocessBackend {
    cmd: Vec<String>,
    reg: PredicateRegistry,
    timeout: Duration,
    proc: Mutex<Option<Proc>>,
    pub last_warnings: Mutex<usize>,
}

impl SubprocessBackend {
    /// `cmd` is split on whitespace: program then arguments.
    pub fn new(cmd: &str, reg: PredicateRegistry, timeout: Duration) -> Self {
        SubprocessBackend {
            cmd: cmd.split_whitespace().map(str::to_string).collect(),
            reg,
            timeout,
            proc: Mutex::new(None),
            last_warnings: Mutex::new(0),
        }
    }

    fn spawn(&self) -> Result<Proc, InferenceError> {
        let (prog, args) = self.cmd.split_first().ok_or_else(|| InferenceError::Connection("empty command".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| InferenceError::Connection(format!("{prog}: {e}")))?;
        let stdin = child.stdin.take().unwrap();
        let stdout = child.stdout.take().unwrap();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Proc { child, stdin, lines: rx })
    }
}

impl Drop for SubprocessBackend {
    fn drop(&mut self) {
        if let Some(mut p) = self.proc.lock().unwrap().take() {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }
}

impl Backend for SubprocessBackend {
    fn name(&self) -> String {
        format!("subprocess {}", self.cmd.join(" "))
    }

    fn infer(&self, req: &InferenceRequest) -> Result<Vec<Candidate>, InferenceError> {
        let mut guard = self.proc.lock().unwrap();
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let p = guard.as_mut().unwrap();
        let line = WireRequest::from_request(req).to_json() + "\n";
        if let Err(e) = p.stdin.write_all(line.as_bytes()).and_then(|_| p.stdin.flush()) {
            let _ = p.child.kill();
            *guard = None;
            return Err(InferenceError::Connection(e.to_string()));
        }
        match p.lines.recv_timeout(self.timeout) {
            Ok(text) => {
                let decoded = decode_response(&text, &self.reg)?;
                *self.last_warnings.lock().unwrap() = decoded.warnings;
                Ok(decoded.candidates)
            }
            Err(err) => {
                let _ = p.child.kill();
                let _ = p.child.wait();
                *guard = None;
                Err(match err {
                    RecvTimeoutError::Timeout => InferenceError::Timeout(self.timeout.as_millis() as u64),
                    RecvTimeoutError::Disconnected => InferenceError::Connection("subprocess closed its output".into()),
                })
            }
        }
    }
}
