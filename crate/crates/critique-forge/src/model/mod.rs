//! Shared domain model: problems, explanations, profiles, reports, and the
//! composition operator that assembles labeled text.

mod compose;
mod types;

pub use compose::{
    assemble_final, compose, parse_composed, ComposeError, FinalOutput, Segment,
    HIGH_LEVEL_LABEL, PERSONALIZED_LABEL, STEP_BY_STEP_LABEL,
};
pub use types::{
    Explanation, ExecutionReport, GenerationParams, JudgeRating, LoopConfig,
    PersonalizedExplanation, Preset, Problem, ProblemReflection, Solution, TestCase, TestKind,
    TestResult, UserInquiry, UserProfile, VerificationAttempt, Verdict,
};
