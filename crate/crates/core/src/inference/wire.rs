//! JSON wire protocol, version 1.
//!
//! Request: `{"assertions": [..], "banned": [..], "max_candidates": n}`.
//! Response: `{"candidates": [{"conjunct": .., "score": ..}], "version": 1}`.

use serde::{Deserialize, Serialize};

use super::{Candidate, InferenceError, InferenceRequest};
use crate::assertion::{canonicalize, canonicalize_heap, PredicateRegistry};
use crate::frontend::parse_assertion;

pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireRequest {
    pub assertions: Vec<String>,
    pub banned: Vec<String>,
    pub max_candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireCandidate {
    pub conjunct: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub candidates: Vec<WireCandidate>,
    pub version: u32,
}

impl WireRequest {
    pub fn from_request(req: &InferenceRequest) -> Self {
        WireRequest {
            assertions: req.assertions.iter().map(|a| canonicalize(a).to_string()).collect(),
            banned: req.banned.iter().map(|b| canonicalize_heap(b).to_string()).collect(),
            max_candidates: req.max_candidates,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

impl WireResponse {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// Parsed candidates plus how many were dropped as invalid.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub candidates: Vec<Candidate>,
    pub warnings: usize,
}

/// Validates a response body: the version must match, every conjunct must
/// parse to a single symbolic heap and every score must be a finite
/// non-negative number. Invalid candidates are dropped and counted.
pub fn decode_response(body: &str, reg: &PredicateRegistry) -> Result<Decoded, InferenceError> {
    let resp: WireResponse = serde_json::from_str(body).map_err(|e| InferenceError::Malformed(e.to_string()))?;
    if resp.version != VERSION {
        return Err(InferenceError::Malformed(format!("unsupported version {}", resp.version)));
    }
    let total = resp.candidates.len();
    let mut out = Decoded { candidates: vec![], warnings: 0 };
    for c in resp.candidates {
        let parsed = parse_assertion(&c.conjunct, reg).ok().filter(|a| a.disjuncts.len() == 1);
        match parsed {
            Some(mut a) if c.score.is_finite() && c.score >= 0.0 => {
                out.candidates.push(Candidate { conjunct: a.disjuncts.remove(0), score: c.score })
            }
            _ => {
                log::warn!("dropping invalid candidate `{}`", c.conjunct);
                out.warnings += 1;
            }
        }
    }
    if total > 0 && out.candidates.is_empty() {
        return Err(InferenceError::AllInvalid(total));
    }
    Ok(out)
}

pub fn encode_candidates(cands: &[Candidate]) -> WireResponse {
    WireResponse {
        candidates: cands
            .iter()
            .map(|c| WireCandidate { conjunct: canonicalize_heap(&c.conjunct).to_string(), score: c.score })
            .collect(),
        version: VERSION,
    }
}
