//! Scripted tool-call scenarios.
//!
//! A scenario is a JSON list of `{"tool", "args", "expect"}` where `expect` is
//! `"ok"` or an error code such as `"E_CYCLE"`. Replaying runs every step
//! against a fresh session and records one transcript line per step.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::error::ErrorCode;
use crate::gest::GestGraph;
use crate::registry::CapabilityRegistry;
use crate::session::Session;
use crate::tools::{self, ToolResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Ok,
    Error(ErrorCode),
}

impl fmt::Display for Expect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expect::Ok => f.write_str("ok"),
            Expect::Error(c) => f.write_str(c.as_str()),
        }
    }
}

impl Serialize for Expect {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expect {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "ok" {
            return Ok(Expect::Ok);
        }
        serde_json::from_value(Value::String(s.clone()))
            .map(Expect::Error)
            .map_err(|_| serde::de::Error::custom(format!("expected \"ok\" or an error code, got \"{s}\"")))
    }
}

impl Expect {
    fn of(r: &ToolResult) -> Self {
        match r.error_code() {
            None => Expect::Ok,
            Some(c) => Expect::Error(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub tool: String,
    #[serde(default)]
    pub args: Value,
    #[serde(default = "expect_ok")]
    pub expect: Expect,
}

fn expect_ok() -> Expect {
    Expect::Ok
}

/// One replayed step; the transcript is these lines as JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub step: usize,
    pub tool: String,
    pub args: Value,
    pub expect: Expect,
    pub outcome: Expect,
    pub response: ToolResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step} ({tool}): expected {expected}, got {got}")]
pub struct Mismatch {
    pub step: usize,
    pub tool: String,
    pub expected: Expect,
    pub got: Expect,
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub transcript: Vec<TranscriptLine>,
    pub mismatches: Vec<Mismatch>,
    /// The graph returned by the last successful `finalize_gest`, or the
    /// session's graph when the scenario never finalizes.
    pub graph: GestGraph,
}

impl Replay {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for line in &self.transcript {
            out.push_str(&serde_json::to_string(line).expect("serializable"));
            out.push('\n');
        }
        out
    }
}

pub fn parse_scenario(text: &str) -> Result<Vec<Step>, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| format!("scenario at {}: {}", e.path(), e.inner()))
}

/// Runs every step, recording mismatches instead of stopping at the first.
pub fn replay(steps: &[Step], reg: Arc<CapabilityRegistry>) -> Replay {
    let mut session = Session::new(reg);
    let mut transcript = Vec::with_capacity(steps.len());
    let mut mismatches = Vec::new();
    let mut finalized = None;
    for (i, st) in steps.iter().enumerate() {
        let step = i + 1;
        let response = tools::call(&mut session, &st.tool, &st.args);
        let outcome = Expect::of(&response);
        if outcome != st.expect {
            mismatches.push(Mismatch {
                step,
                tool: st.tool.clone(),
                expected: st.expect,
                got: outcome,
            });
        }
        if st.tool == "finalize_gest" && response.ok {
            finalized = response
                .result
                .as_ref()
                .and_then(|r| r.get("graph"))
                .and_then(|g| serde_json::from_value(g.clone()).ok());
        }
        transcript.push(TranscriptLine {
            step,
            tool: st.tool.clone(),
            args: st.args.clone(),
            expect: st.expect,
            outcome,
            response,
        });
    }
    Replay {
        transcript,
        mismatches,
        graph: finalized.unwrap_or_else(|| session.graph().clone()),
    }
}
