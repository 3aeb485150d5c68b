//! Machine-readable output. Every top-level document carries
//! `report_version`.

use serde::{Deserialize, Serialize};

use sepinv::invgen::{Checks, FuncReport, InvariantReport, OracleCheck, Timings, TraceStep};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopJson {
    pub invariant: String,
    pub verified: bool,
    pub checks: Checks,
    pub attempts: usize,
    pub trace: Vec<TraceStep>,
    pub inner: Vec<LoopJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
}

impl From<&InvariantReport> for LoopJson {
    fn from(r: &InvariantReport) -> Self {
        LoopJson {
            invariant: r.invariant.to_string(),
            verified: r.verified(),
            checks: r.checks,
            attempts: r.attempts,
            trace: r.trace.clone(),
            inner: r.inner.iter().map(LoopJson::from).collect(),
            oracle: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuncJson {
    pub name: String,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub loops: Vec<LoopJson>,
    pub timings: TimingsJson,
}

impl FuncJson {
    pub fn new(r: &FuncReport, timings: TimingsJson) -> Self {
        FuncJson {
            name: r.name.clone(),
            verified: r.verified(),
            error: r.error.as_ref().map(|e| e.to_string()),
            loops: r.loops.iter().map(LoopJson::from).collect(),
            timings,
        }
    }
}

/// Seconds per stage plus wall-clock total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingsJson {
    pub symbolic: f64,
    pub infer: f64,
    pub solver: f64,
    pub total: f64,
}

impl TimingsJson {
    pub fn new(t: Timings, total: f64) -> Self {
        TimingsJson { symbolic: t.symbolic, infer: t.infer, solver: t.solver, total }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub report_version: u32,
    pub file: String,
    pub backend: String,
    pub verified: bool,
    pub functions: Vec<FuncJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecReport {
    pub report_version: u32,
    pub func: String,
    pub states: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntailJson {
    pub line: usize,
    pub source: String,
    pub target: String,
    pub proved: bool,
    pub exhausted: bool,
    /// Bounded oracle verdict when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_valid: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter_model: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntailReport {
    pub report_version: u32,
    pub all_proved: bool,
    pub results: Vec<EntailJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timings: TimingsJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub report_version: u32,
    pub backend: String,
    pub rows: Vec<BenchRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServeCheckReport {
    pub report_version: u32,
    pub backend: String,
    pub requests: usize,
    pub ok: usize,
    pub failures: Vec<String>,
}
