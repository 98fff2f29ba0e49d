//! critique-forge: faithful, personalized explanations of competitive
//! programming solutions via two independent refinement loops, plus the
//! evaluation harness that scores them.
//!
//! The faithfulness loop drafts an explanation, asks a model to write a
//! verification program from the explanation alone, executes it against the
//! problem's public tests in a sandbox, and revises on failure. The
//! personalization loop adapts the result to a user profile mined from
//! inquiry history, refereed by a role-playing judge. Final outputs compose
//! the faithful text with the personalized text, faithful first.
//!
//! Model access goes through [`gateway`], which supports a live HTTP
//! backend, a scripted queue for tests, and record/replay cassettes for
//! reproducible runs.

pub mod config;
pub mod corpus;
mod error;
pub mod eval;
pub mod executor;
pub mod faithfulness;
pub mod gateway;
pub mod model;
pub mod parse;
pub mod personalization;
pub mod prompt;
pub mod record;
pub mod runner;
pub mod util;

pub use error::PipelineError;
pub use model::{
    assemble_final, compose, parse_composed, Explanation, ExecutionReport, FinalOutput,
    GenerationParams, JudgeRating, LoopConfig, PersonalizedExplanation, Preset, Problem,
    ProblemReflection, Segment, Solution, TestCase, TestKind, TestResult, UserInquiry,
    UserProfile, VerificationAttempt, Verdict,
};
