//! Renders the ten prompt kinds used by the loops and the eval harness from
//! typed context. Each kind declares a fixed set of required context fields;
//! rendering validates the set exactly and lays the fields out with the
//! shared composition operator, so every context value appears verbatim in
//! the user message.

pub mod templates;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::gateway::ChatMessage;
use crate::model::{compose, Segment};

/// The ten prompts the engine knows how to issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptKind {
    ReflectProblem,
    InitExplanation,
    ReviseExplanation,
    GenVerificationSolution,
    AnalyzeFailure,
    ExtractProfile,
    InitPersonalized,
    RevisePersonalized,
    JudgeRating,
    JudgeCompare,
}

impl PromptKind {
    pub fn name(self) -> &'static str {
        match self {
            PromptKind::ReflectProblem => "reflect_problem",
            PromptKind::InitExplanation => "init_explanation",
            PromptKind::ReviseExplanation => "revise_explanation",
            PromptKind::GenVerificationSolution => "gen_verification_solution",
            PromptKind::AnalyzeFailure => "analyze_failure",
            PromptKind::ExtractProfile => "extract_profile",
            PromptKind::InitPersonalized => "init_personalized",
            PromptKind::RevisePersonalized => "revise_personalized",
            PromptKind::JudgeRating => "judge_rating",
            PromptKind::JudgeCompare => "judge_compare",
        }
    }

    /// Required context fields, in render order.
    pub fn required_fields(self) -> &'static [ContextField] {
        use ContextField::*;
        match self {
            PromptKind::ReflectProblem => &[Problem],
            PromptKind::InitExplanation => &[Problem, Solution, Reflection],
            PromptKind::ReviseExplanation => &[
                Problem,
                Solution,
                Reflection,
                Explanation,
                VerificationSource,
                ExecutionOutput,
                FailureAnalysis,
            ],
            PromptKind::GenVerificationSolution => &[Problem, Explanation],
            PromptKind::AnalyzeFailure => {
                &[Problem, Solution, Reflection, VerificationSource, ExecutionOutput]
            }
            PromptKind::ExtractProfile => &[History],
            PromptKind::InitPersonalized => &[Problem, Solution, Profile, FaithfulExplanation],
            PromptKind::RevisePersonalized => &[
                Problem,
                Solution,
                FaithfulExplanation,
                Profile,
                Personalized,
                JudgeFeedback,
            ],
            PromptKind::JudgeRating => &[Profile, Problem, Solution, Personalized],
            PromptKind::JudgeCompare => &[Profile, Problem, Solution, CandidateA, CandidateB],
        }
    }

    fn system_text(self) -> &'static str {
        match self {
            PromptKind::ReflectProblem => templates::REFLECT_SYSTEM,
            PromptKind::InitExplanation => templates::INIT_EXPLANATION_SYSTEM,
            PromptKind::ReviseExplanation => templates::REVISE_EXPLANATION_SYSTEM,
            PromptKind::GenVerificationSolution => templates::GEN_VERIFICATION_SYSTEM,
            PromptKind::AnalyzeFailure => templates::ANALYZE_FAILURE_SYSTEM,
            PromptKind::ExtractProfile => templates::EXTRACT_PROFILE_SYSTEM,
            PromptKind::InitPersonalized => templates::INIT_PERSONALIZED_SYSTEM,
            PromptKind::RevisePersonalized => templates::REVISE_PERSONALIZED_SYSTEM,
            PromptKind::JudgeRating => templates::JUDGE_RATING_SYSTEM,
            PromptKind::JudgeCompare => templates::JUDGE_COMPARE_SYSTEM,
        }
    }

    fn task_text(self) -> &'static str {
        match self {
            PromptKind::ReflectProblem => templates::REFLECT_TASK,
            PromptKind::InitExplanation => templates::INIT_EXPLANATION_TASK,
            PromptKind::ReviseExplanation => templates::REVISE_EXPLANATION_TASK,
            PromptKind::GenVerificationSolution => templates::GEN_VERIFICATION_TASK,
            PromptKind::AnalyzeFailure => templates::ANALYZE_FAILURE_TASK,
            PromptKind::ExtractProfile => templates::EXTRACT_PROFILE_TASK,
            PromptKind::InitPersonalized => templates::INIT_PERSONALIZED_TASK,
            PromptKind::RevisePersonalized => templates::REVISE_PERSONALIZED_TASK,
            PromptKind::JudgeRating => templates::JUDGE_RATING_TASK,
            PromptKind::JudgeCompare => templates::JUDGE_COMPARE_TASK,
        }
    }
}

/// Context values a prompt kind may condition on. Note there is no field for
/// the oracle solution in `GenVerificationSolution`'s set: verification
/// programs must be written from the explanation alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContextField {
    Problem,
    Solution,
    Reflection,
    /// The current faithful explanation draft.
    Explanation,
    VerificationSource,
    ExecutionOutput,
    FailureAnalysis,
    History,
    Profile,
    /// The faithfulness loop's final explanation, as conditioning for the
    /// personalization loop.
    FaithfulExplanation,
    /// The current personalized explanation draft.
    Personalized,
    JudgeFeedback,
    CandidateA,
    CandidateB,
}

impl ContextField {
    pub fn label(self) -> &'static str {
        match self {
            ContextField::Problem => "PROBLEM",
            ContextField::Solution => "SOLUTION",
            ContextField::Reflection => "PROBLEM REFLECTION",
            ContextField::Explanation => "EXPLANATION",
            ContextField::VerificationSource => "VERIFICATION SOLUTION",
            ContextField::ExecutionOutput => "EXECUTION RESULTS",
            ContextField::FailureAnalysis => "FAILURE ANALYSIS",
            ContextField::History => "INQUIRY HISTORY",
            ContextField::Profile => "USER PROFILE",
            ContextField::FaithfulExplanation => "FAITHFUL EXPLANATION",
            ContextField::Personalized => "PERSONALIZED EXPLANATION",
            ContextField::JudgeFeedback => "JUDGE FEEDBACK",
            ContextField::CandidateA => "EXPLANATION A",
            ContextField::CandidateB => "EXPLANATION B",
        }
    }
}

/// Field -> value map handed to [`render`].
#[derive(Debug, Clone, Default)]
pub struct PromptContext {
    values: BTreeMap<ContextField, String>,
}

impl PromptContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, field: ContextField, value: impl Into<String>) -> Self {
        self.values.insert(field, value.into());
        self
    }

    pub fn get(&self, field: ContextField) -> Option<&str> {
        self.values.get(&field).map(String::as_str)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt {kind} is missing required field {field}")]
    MissingField { kind: &'static str, field: &'static str },
    #[error("prompt {kind} does not accept field {field}")]
    UnexpectedField { kind: &'static str, field: &'static str },
}

const TASK_LABEL: &str = "TASK";

/// Renders a prompt kind into `[system, user]` messages. The context must
/// supply exactly the kind's required fields; every value appears verbatim
/// in the user message under its fixed label, followed by the kind's task
/// instructions.
pub fn render(kind: PromptKind, context: &PromptContext) -> Result<Vec<ChatMessage>, PromptError> {
    let required = kind.required_fields();
    for field in context.values.keys() {
        if !required.contains(field) {
            return Err(PromptError::UnexpectedField {
                kind: kind.name(),
                field: field.label(),
            });
        }
    }
    let mut segments = Vec::with_capacity(required.len() + 1);
    for field in required {
        let value = context
            .values
            .get(field)
            .ok_or(PromptError::MissingField {
                kind: kind.name(),
                field: field.label(),
            })?;
        segments.push(Segment::new(field.label(), value));
    }
    segments.push(Segment::new(TASK_LABEL, kind.task_text()));
    let user = compose(&segments).expect("labels are fixed and distinct");
    Ok(vec![
        ChatMessage::system(kind.system_text()),
        ChatMessage::user(user),
    ])
}

/// Renders the self-selection ranking prompt over candidate explanations.
/// Not one of the ten loop kinds; used only by the self-selection runner.
pub fn render_selection(
    problem: &str,
    solution: &str,
    candidates: &[String],
) -> Vec<ChatMessage> {
    let mut segments = vec![
        Segment::new("PROBLEM", problem),
        Segment::new("SOLUTION", solution),
    ];
    for (i, candidate) in candidates.iter().enumerate() {
        segments.push(Segment::new(format!("CANDIDATE {}", i + 1), candidate));
    }
    segments.push(Segment::new(TASK_LABEL, templates::SELECT_TASK));
    vec![
        ChatMessage::system(templates::SELECT_SYSTEM),
        ChatMessage::user(compose(&segments).expect("labels are distinct")),
    ]
}
