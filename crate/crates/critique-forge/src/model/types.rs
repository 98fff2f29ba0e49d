//! Domain types shared by the loops, the executor, and the eval harness.

use serde::{Deserialize, Serialize};

/// How a test case may be used.
///
/// Public cases drive in-loop verification; private and generated cases are
/// reserved for solve-rate scoring and never shown to the loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Public,
    Private,
    Generated,
}

/// A single stdin/stdout test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: String,
    pub expected_output: String,
    pub kind: TestKind,
}

/// A human-written accepted solution attached to a problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    /// Interpreter identifier, e.g. `python3`.
    pub language_tag: String,
    pub source: String,
}

impl Solution {
    /// Character count of the source; the corpus keeps the shortest
    /// solution per problem by this measure.
    pub fn char_length(&self) -> usize {
        self.source.chars().count()
    }
}

/// A competitive-programming problem after ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    /// Unique within a corpus.
    pub id: String,
    pub title: String,
    pub description: String,
    pub public_tests: Vec<TestCase>,
    /// Private and generated cases, used only for solve-rate scoring.
    pub scoring_tests: Vec<TestCase>,
    pub solutions: Vec<Solution>,
}

impl Problem {
    /// The oracle solution retained by ingestion (the shortest one).
    pub fn oracle_solution(&self) -> Option<&Solution> {
        self.solutions.first()
    }
}

/// Structured summary of a problem: goals, inputs, outputs, conditions,
/// plus anything else the model volunteered. `raw` always keeps the
/// verbatim completion; fields left empty where the model omitted a section.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemReflection {
    pub goals: String,
    pub inputs: String,
    pub outputs: String,
    pub conditions: String,
    pub other: String,
    pub raw: String,
}

/// A faithful explanation draft: a detailed sequential walkthrough plus a
/// high-level summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub step_by_step: String,
    pub high_level: String,
    /// 0-based draft index within the faithfulness loop.
    pub iteration: u32,
    /// True once a verification solution written from this draft passed
    /// every public test.
    pub verified: bool,
}

/// Per-test outcome of running candidate code in the sandbox.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accepted,
    WrongAnswer,
    RuntimeError,
    Timeout,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Accepted => "Accepted",
            Verdict::WrongAnswer => "WrongAnswer",
            Verdict::RuntimeError => "RuntimeError",
            Verdict::Timeout => "Timeout",
        };
        f.write_str(s)
    }
}

/// Result of one test execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub verdict: Verdict,
    pub actual_output: String,
    pub stderr: String,
    pub wall_time_ms: u64,
}

/// Outcome of running one program against an ordered list of tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub per_test: Vec<TestResult>,
    pub all_passed: bool,
}

impl ExecutionReport {
    /// Builds a report; `all_passed` is derived, never supplied.
    pub fn new(per_test: Vec<TestResult>) -> Self {
        let all_passed = per_test.iter().all(|t| t.verdict == Verdict::Accepted);
        Self {
            per_test,
            all_passed,
        }
    }

    pub fn accepted_count(&self) -> usize {
        self.per_test
            .iter()
            .filter(|t| t.verdict == Verdict::Accepted)
            .count()
    }
}

/// One verification round of the faithfulness loop: the generated
/// verification program, its execution report, and (when the round failed
/// and budget allowed another draft) the model's failure analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationAttempt {
    pub iteration: u32,
    pub verification_source: String,
    pub report: ExecutionReport,
    pub analysis: Option<String>,
}

/// One entry from a user's inquiry history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserInquiry {
    pub title: String,
    pub tags: Vec<String>,
    pub body: String,
    pub posted_at: chrono::DateTime<chrono::Utc>,
}

/// Six-aspect programming persona inferred from inquiry history.
/// `raw` keeps the verbatim completion; fields are empty where absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub programming_languages: String,
    pub skill_level: String,
    pub topics_of_interest: String,
    pub problem_solving_approach: String,
    pub experience: String,
    pub other: String,
    pub raw: String,
}

/// Rating produced by the role-playing judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRating {
    /// Integer in 1..=10.
    pub score: u8,
    /// `score >= satisfaction_threshold`.
    pub satisfied: bool,
    pub suggestions: String,
    pub raw: String,
}

/// A personalized explanation draft with the rating it last received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonalizedExplanation {
    pub body: String,
    /// 0-based draft index within the personalization loop.
    pub iteration: u32,
    pub rating: Option<JudgeRating>,
}

/// Sampling preset: code generation runs cold, text generation runs warm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Code,
    Text,
}

/// Sampling parameters sent to the model verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub preset: Preset,
}

impl GenerationParams {
    /// Cold sampling for program synthesis.
    pub fn code() -> Self {
        Self {
            temperature: 0.2,
            top_p: 0.1,
            max_tokens: 2048,
            preset: Preset::Code,
        }
    }

    /// Warmer sampling for prose.
    pub fn text() -> Self {
        Self {
            temperature: 0.7,
            top_p: 0.8,
            max_tokens: 2048,
            preset: Preset::Text,
        }
    }
}

/// Iteration and verification budgets shared by both loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    /// Maximum drafts per loop before giving up.
    pub max_iterations: u32,
    /// Independent solution samples drawn per problem when scoring.
    pub samples_per_problem: u32,
    /// Judge score at or above which the personalization loop stops.
    pub satisfaction_threshold: u8,
    /// Wall-clock budget per sandbox test.
    pub per_test_timeout_ms: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: 4,
            samples_per_problem: 4,
            satisfaction_threshold: 8,
            per_test_timeout_ms: 10_000,
        }
    }
}

impl LoopConfig {
    /// All budgets must be strictly positive.
    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations == 0 {
            return Err("max_iterations must be >= 1".into());
        }
        if self.samples_per_problem == 0 {
            return Err("samples_per_problem must be >= 1".into());
        }
        if self.satisfaction_threshold == 0 || self.satisfaction_threshold > 10 {
            return Err("satisfaction_threshold must be in 1..=10".into());
        }
        if self.per_test_timeout_ms == 0 {
            return Err("per_test_timeout_ms must be >= 1".into());
        }
        Ok(())
    }
}
