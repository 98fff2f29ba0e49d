//! Solve-rate scoring: can a fresh model instance solve the problem given
//! only the problem statement and a generated explanation? Samples n
//! programs and scores them against the held-out (private + generated)
//! tests.

use std::collections::BTreeMap;

use crate::error::PipelineError;
use crate::executor::{ExecLimits, SandboxExecutor};
use crate::gateway::{ChatBackend, ChatRequest};
use crate::model::{Explanation, GenerationParams, Problem};
use crate::parse;
use crate::prompt::{self, ContextField, PromptContext, PromptKind};
use crate::record::RunRecord;

use super::metrics::pass_at_k;

/// How solution samples are generated and executed.
#[derive(Debug, Clone)]
pub struct SolveSettings {
    pub language_tag: String,
    pub code_params: GenerationParams,
    pub exec_limits: ExecLimits,
}

/// Per-problem solve-rate outcome.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveRate {
    /// Samples drawn.
    pub n: u32,
    /// Samples that passed every scoring test.
    pub c: u32,
    /// Requested k -> unbiased pass@k estimate.
    pub pass_at: BTreeMap<u32, f64>,
}

/// Samples `n` independent programs conditioned on the problem and the
/// explanation only (the oracle solution never enters the prompt), executes
/// each against the scoring tests, and estimates pass@k for every requested
/// k <= n.
pub fn solve_rate_for_problem(
    backend: &dyn ChatBackend,
    executor: &SandboxExecutor,
    problem: &Problem,
    explanation: &Explanation,
    n: u32,
    ks: &[u32],
    settings: &SolveSettings,
    record: &mut RunRecord,
) -> Result<SolveRate, PipelineError> {
    if problem.scoring_tests.is_empty() {
        return Err(PipelineError::Contract(format!(
            "problem {} has no scoring tests",
            problem.id
        )));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(PipelineError::Contract(format!(
            "pass@{k} requested with n={n}; need 1 <= k <= n"
        )));
    }

    let ctx = PromptContext::new()
        .with(ContextField::Problem, &problem.description)
        .with(ContextField::Explanation, explanation.to_text());
    let kind = PromptKind::GenVerificationSolution;

    let mut correct = 0u32;
    for _ in 0..n {
        let messages = prompt::render(kind, &ctx)?;
        record.log_prompt(kind.name(), &messages);
        let completion =
            backend.complete(&ChatRequest::new(messages, settings.code_params.clone()))?;
        record.log_completion(kind.name(), &completion);

        let Some(code) = parse::extract_fenced_code(&completion.content) else {
            continue; // counts as a failing sample
        };
        if code.trim().is_empty() {
            continue;
        }
        let report = executor.run_tests(
            &code,
            &settings.language_tag,
            &problem.scoring_tests,
            settings.exec_limits,
        )?;
        record.log_execution(explanation.iteration, &report);
        if report.all_passed {
            correct += 1;
        }
    }

    let mut pass_at = BTreeMap::new();
    for &k in ks {
        let value = pass_at_k(n as u64, correct as u64, k as u64)
            .map_err(|e| PipelineError::Contract(e.to_string()))?;
        pass_at.insert(k, value);
    }
    Ok(SolveRate {
        n,
        c: correct,
        pass_at,
    })
}
