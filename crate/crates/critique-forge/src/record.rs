//! Append-only trace of a pipeline run: every prompt, completion, execution
//! report, rating, and the final output, in order. One run record maps to
//! one JSON Lines file; a run has a single writer.

use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::gateway::{ChatMessage, Completion};
use crate::model::{ExecutionReport, FinalOutput, JudgeRating};

pub const STAGE_RUN_START: &str = "run_start";
pub const STAGE_PROMPT: &str = "prompt";
pub const STAGE_COMPLETION: &str = "completion";
pub const STAGE_EXECUTION: &str = "execution";
pub const STAGE_RATING: &str = "rating";
pub const STAGE_BEST_ATTEMPT: &str = "best_attempt";
pub const STAGE_FINAL_OUTPUT: &str = "final_output";
pub const STAGE_RUN_FAILED: &str = "run_failed";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunEvent {
    pub seq: u64,
    pub stage: String,
    pub ts: String,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run_id: String,
    pub problem_id: String,
    pub user_id: Option<String>,
    events: Vec<RunEvent>,
}

/// `<utc timestamp>-<short digest of problem/user/start>`, unique enough for
/// a runs directory and sortable by start time.
pub fn generate_run_id(problem_id: &str, user_id: Option<&str>) -> String {
    let now = Utc::now();
    let mut hasher = Sha256::new();
    hasher.update(problem_id.as_bytes());
    hasher.update(user_id.unwrap_or("").as_bytes());
    hasher.update(now.timestamp_nanos_opt().unwrap_or_default().to_le_bytes());
    let digest = hex::encode(hasher.finalize());
    format!("{}-{}", now.format("%Y%m%dT%H%M%S%3fZ"), &digest[..8])
}

impl RunRecord {
    pub fn new(run_id: String, problem_id: &str, user_id: Option<&str>) -> Self {
        let mut record = Self {
            run_id: run_id.clone(),
            problem_id: problem_id.to_string(),
            user_id: user_id.map(str::to_string),
            events: Vec::new(),
        };
        record.append(
            STAGE_RUN_START,
            json!({
                "run_id": run_id,
                "problem_id": problem_id,
                "user_id": user_id,
                "prompt_version": crate::prompt::templates::PROMPT_VERSION,
            }),
        );
        record
    }

    pub fn start(problem_id: &str, user_id: Option<&str>) -> Self {
        Self::new(generate_run_id(problem_id, user_id), problem_id, user_id)
    }

    pub fn append(&mut self, stage: &str, payload: serde_json::Value) {
        self.events.push(RunEvent {
            seq: self.events.len() as u64,
            stage: stage.to_string(),
            ts: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            payload,
        });
    }

    pub fn log_prompt(&mut self, kind: &str, messages: &[ChatMessage]) {
        self.append(STAGE_PROMPT, json!({ "kind": kind, "messages": messages }));
    }

    pub fn log_completion(&mut self, kind: &str, completion: &Completion) {
        self.append(
            STAGE_COMPLETION,
            json!({
                "kind": kind,
                "content": completion.content,
                "finish_reason": completion.finish_reason,
                "backend_id": completion.backend_id,
                "latency_ms": completion.latency_ms,
            }),
        );
    }

    pub fn log_execution(&mut self, iteration: u32, report: &ExecutionReport) {
        self.append(
            STAGE_EXECUTION,
            json!({ "iteration": iteration, "report": report }),
        );
    }

    pub fn log_rating(&mut self, iteration: u32, rating: &JudgeRating) {
        self.append(
            STAGE_RATING,
            json!({ "iteration": iteration, "rating": rating }),
        );
    }

    pub fn log_best_attempt(&mut self, iteration: u32, accepted: usize, total: usize) {
        self.append(
            STAGE_BEST_ATTEMPT,
            json!({ "iteration": iteration, "accepted": accepted, "total": total }),
        );
    }

    pub fn log_final(&mut self, output: &FinalOutput) {
        self.append(STAGE_FINAL_OUTPUT, json!({ "final_output": output }));
    }

    pub fn log_failed(&mut self, error: &str) {
        self.append(STAGE_RUN_FAILED, json!({ "error": error }));
    }

    pub fn events(&self) -> &[RunEvent] {
        &self.events
    }

    /// Folds a child record (e.g. one unit of a batch evaluation) into this
    /// one: events are re-sequenced in append order, original timestamps
    /// kept, and the child's run_start header dropped.
    pub fn merge_events(&mut self, child: RunRecord) {
        for event in child.events {
            if event.stage == STAGE_RUN_START {
                continue;
            }
            self.events.push(RunEvent {
                seq: self.events.len() as u64,
                stage: event.stage,
                ts: event.ts,
                payload: event.payload,
            });
        }
    }

    /// A completed run carries exactly one final-output event.
    pub fn is_complete(&self) -> bool {
        self.events
            .iter()
            .filter(|e| e.stage == STAGE_FINAL_OUTPUT)
            .count()
            == 1
    }

    /// Concatenated message contents of every logged prompt of `kind`;
    /// the raw material for leak scans.
    pub fn prompt_texts_of_kind(&self, kind: &str) -> Vec<String> {
        self.events
            .iter()
            .filter(|e| e.stage == STAGE_PROMPT && e.payload["kind"] == kind)
            .map(|e| {
                e.payload["messages"]
                    .as_array()
                    .map(|msgs| {
                        msgs.iter()
                            .filter_map(|m| m["content"].as_str())
                            .collect::<Vec<_>>()
                            .join("\n")
                    })
                    .unwrap_or_default()
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        crate::util::atomic_write(path, self.to_jsonl().as_bytes())
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut events = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: RunEvent = serde_json::from_str(line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), lineno + 1),
                )
            })?;
            events.push(event);
        }
        let start = events
            .iter()
            .find(|e| e.stage == STAGE_RUN_START)
            .map(|e| e.payload.clone())
            .unwrap_or_default();
        Ok(Self {
            run_id: start["run_id"].as_str().unwrap_or_default().to_string(),
            problem_id: start["problem_id"].as_str().unwrap_or_default().to_string(),
            user_id: start["user_id"].as_str().map(str::to_string),
            events,
        })
    }
}
