//! Conjunct inference backends: the built-in fold-mining heuristic and
//! clients for external servers speaking the JSON wire protocol.

mod heuristic;
mod remote;
pub mod wire;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assertion::{canonicalize_heap, Assertion, SymbolicHeap};

pub use heuristic::{HeuristicBackend, HeuristicConfig};
pub use remote::{HttpBackend, SubprocessBackend, DEFAULT_TIMEOUT};

/// A proposed conjunct: a `*`-conjunction of spatial atoms, optionally
/// with pure atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub conjunct: SymbolicHeap,
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceRequest {
    pub assertions: Vec<Assertion>,
    pub banned: Vec<SymbolicHeap>,
    pub max_candidates: usize,
}

impl InferenceRequest {
    pub fn new(assertions: Vec<Assertion>, banned: Vec<SymbolicHeap>, max_candidates: usize) -> Self {
        let banned = banned.iter().map(canonicalize_heap).collect();
        InferenceRequest { assertions, banned, max_candidates }
    }

    pub fn is_banned(&self, c: &SymbolicHeap) -> bool {
        let c = canonicalize_heap(c);
        self.banned.iter().any(|b| canonicalize_heap(b) == c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InferenceError {
    #[error("backend timed out after {0} ms")]
    Timeout(u64),
    #[error("cannot reach backend: {0}")]
    Connection(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("all {0} candidates were invalid")]
    AllInvalid(usize),
}

impl InferenceError {
    /// Every backend error is retryable from the engine's point of view.
    pub fn is_retryable(&self) -> bool {
        true
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> String;
    fn infer(&self, req: &InferenceRequest) -> Result<Vec<Candidate>, InferenceError>;
}

/// Queries `backend` and drops banned conjuncts locally, whatever the
/// backend did with the ban list. Keeps the backend's order.
pub fn infer(backend: &dyn Backend, req: &InferenceRequest) -> Result<Vec<Candidate>, InferenceError> {
    let mut out: Vec<Candidate> = backend.infer(req)?.into_iter().filter(|c| !req.is_banned(&c.conjunct)).collect();
    if req.max_candidates > 0 {
        out.truncate(req.max_candidates);
    }
    Ok(out)
}

/// A backend that never proposes anything.
pub struct NullBackend;

impl Backend for NullBackend {
    fn name(&self) -> String {
        "null".into()
    }

    fn infer(&self, _req: &InferenceRequest) -> Result<Vec<Candidate>, InferenceError> {
        Ok(vec![])
    }
}

/// Proposes a fixed list in order.
pub struct FixedBackend(pub Vec<SymbolicHeap>);

impl Backend for FixedBackend {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn infer(&self, _req: &InferenceRequest) -> Result<Vec<Candidate>, InferenceError> {
        let n = self.0.len();
        Ok(self.0.iter().enumerate().map(|(i, c)| Candidate { conjunct: c.clone(), score: (n - i) as f64 }).collect())
    }
}

#[cfg(test)]
mod tests;
