//! The faithfulness loop: reflect on the problem, draft a two-part
//! explanation, verify it by generating and executing a verification program
//! against the public tests, analyze failures, and revise — until the
//! verification passes or the iteration budget is spent.
//!
//! Verification programs are generated from the problem and the explanation
//! alone; the oracle solution never enters that prompt, so test results
//! measure what the explanation actually teaches.

use crate::error::PipelineError;
use crate::executor::{ExecLimits, SandboxExecutor};
use crate::gateway::{ChatBackend, ChatRequest, Completion};
use crate::model::{
    Explanation, ExecutionReport, GenerationParams, LoopConfig, Problem, ProblemReflection,
    Solution, TestCase, TestResult, VerificationAttempt, Verdict,
};
use crate::parse;
use crate::prompt::{self, ContextField, PromptContext, PromptKind};
use crate::record::RunRecord;

/// Result of one full loop run.
#[derive(Debug, Clone)]
pub struct FaithfulnessOutcome {
    /// On success, the first verified draft; on budget exhaustion, the last
    /// (most context-informed) draft with `verified = false`.
    pub final_explanation: Explanation,
    /// One entry per verification round, iteration-ordered.
    pub attempts: Vec<VerificationAttempt>,
    pub reflection: ProblemReflection,
}

pub struct FaithfulnessLoop<'a> {
    pub backend: &'a dyn ChatBackend,
    pub executor: &'a SandboxExecutor,
    pub config: &'a LoopConfig,
    pub code_params: GenerationParams,
    pub text_params: GenerationParams,
    /// Language tag the verification solutions are executed as.
    pub language_tag: &'a str,
    pub exec_limits: ExecLimits,
}

impl<'a> FaithfulnessLoop<'a> {
    /// Conventional presets and limits; the loop budget comes from `config`.
    pub fn new(
        backend: &'a dyn ChatBackend,
        executor: &'a SandboxExecutor,
        config: &'a LoopConfig,
        language_tag: &'a str,
    ) -> Self {
        Self {
            backend,
            executor,
            config,
            code_params: GenerationParams::code(),
            text_params: GenerationParams::text(),
            language_tag,
            exec_limits: ExecLimits {
                per_test_timeout_ms: config.per_test_timeout_ms,
                ..ExecLimits::default()
            },
        }
    }

    fn complete_kind(
        &self,
        kind: PromptKind,
        ctx: &PromptContext,
        params: GenerationParams,
        record: &mut RunRecord,
    ) -> Result<Completion, PipelineError> {
        let messages = prompt::render(kind, ctx)?;
        record.log_prompt(kind.name(), &messages);
        let completion = self.backend.complete(&ChatRequest::new(messages, params))?;
        record.log_completion(kind.name(), &completion);
        Ok(completion)
    }

    /// Extracts goals, inputs, outputs, and conditions from the problem
    /// statement. Parse failures degrade to an all-raw reflection.
    pub fn reflect(
        &self,
        problem: &Problem,
        record: &mut RunRecord,
    ) -> Result<ProblemReflection, PipelineError> {
        let ctx = PromptContext::new().with(ContextField::Problem, &problem.description);
        let completion = self.complete_kind(
            PromptKind::ReflectProblem,
            &ctx,
            self.text_params.clone(),
            record,
        )?;
        Ok(parse::parse_reflection(&completion.content))
    }

    /// First draft, conditioned on problem, oracle solution, and reflection.
    pub fn init_explanation(
        &self,
        problem: &Problem,
        solution: &Solution,
        reflection: &ProblemReflection,
        record: &mut RunRecord,
    ) -> Result<Explanation, PipelineError> {
        let ctx = PromptContext::new()
            .with(ContextField::Problem, &problem.description)
            .with(ContextField::Solution, &solution.source)
            .with(ContextField::Reflection, &reflection.raw);
        let completion = self.complete_kind(
            PromptKind::InitExplanation,
            &ctx,
            self.text_params.clone(),
            record,
        )?;
        let (step_by_step, high_level) = parse::parse_explanation_parts(&completion.content);
        Ok(Explanation {
            step_by_step,
            high_level,
            iteration: 0,
            verified: false,
        })
    }

    /// Generates a verification program from the explanation alone and runs
    /// it against the problem's public tests. The returned attempt carries
    /// no analysis; [`Self::analyze_failure`] fills that in when the loop
    /// decides to revise.
    pub fn verify(
        &self,
        problem: &Problem,
        explanation: &Explanation,
        record: &mut RunRecord,
    ) -> Result<VerificationAttempt, PipelineError> {
        let ctx = PromptContext::new()
            .with(ContextField::Problem, &problem.description)
            .with(ContextField::Explanation, explanation.to_text());
        let completion = self.complete_kind(
            PromptKind::GenVerificationSolution,
            &ctx,
            self.code_params.clone(),
            record,
        )?;

        let (source, report) = match parse::extract_fenced_code(&completion.content) {
            Some(code) if !code.trim().is_empty() => {
                let report = self.executor.run_tests(
                    &code,
                    self.language_tag,
                    &problem.public_tests,
                    self.exec_limits,
                )?;
                (code, report)
            }
            // No usable program came back; score every public test as a
            // runtime failure so the loop can keep going.
            _ => {
                let fallback = completion.content.trim().to_string();
                let report = ExecutionReport::new(
                    problem
                        .public_tests
                        .iter()
                        .map(|_| TestResult {
                            verdict: Verdict::RuntimeError,
                            actual_output: String::new(),
                            stderr: "no fenced code block in completion".into(),
                            wall_time_ms: 0,
                        })
                        .collect(),
                );
                (fallback, report)
            }
        };

        record.log_execution(explanation.iteration, &report);
        Ok(VerificationAttempt {
            iteration: explanation.iteration,
            verification_source: source,
            report,
            analysis: None,
        })
    }

    /// Asks the model to analyze why the verification program failed. Only
    /// callable on a failed attempt.
    pub fn analyze_failure(
        &self,
        problem: &Problem,
        solution: &Solution,
        reflection: &ProblemReflection,
        attempt: &VerificationAttempt,
        record: &mut RunRecord,
    ) -> Result<String, PipelineError> {
        if attempt.report.all_passed {
            return Err(PipelineError::Contract(
                "analyze_failure called on an all-passed attempt".into(),
            ));
        }
        let ctx = PromptContext::new()
            .with(ContextField::Problem, &problem.description)
            .with(ContextField::Solution, &solution.source)
            .with(ContextField::Reflection, &reflection.raw)
            .with(ContextField::VerificationSource, &attempt.verification_source)
            .with(
                ContextField::ExecutionOutput,
                format_execution_for_prompt(&problem.public_tests, &attempt.report),
            );
        let completion = self.complete_kind(
            PromptKind::AnalyzeFailure,
            &ctx,
            self.text_params.clone(),
            record,
        )?;
        Ok(completion.content)
    }

    /// Produces the next draft from the full failure context.
    pub fn revise_explanation(
        &self,
        problem: &Problem,
        solution: &Solution,
        reflection: &ProblemReflection,
        previous: &Explanation,
        attempt: &VerificationAttempt,
        analysis: &str,
        record: &mut RunRecord,
    ) -> Result<Explanation, PipelineError> {
        let ctx = PromptContext::new()
            .with(ContextField::Problem, &problem.description)
            .with(ContextField::Solution, &solution.source)
            .with(ContextField::Reflection, &reflection.raw)
            .with(ContextField::Explanation, previous.to_text())
            .with(ContextField::VerificationSource, &attempt.verification_source)
            .with(
                ContextField::ExecutionOutput,
                format_execution_for_prompt(&problem.public_tests, &attempt.report),
            )
            .with(ContextField::FailureAnalysis, analysis);
        let completion = self.complete_kind(
            PromptKind::ReviseExplanation,
            &ctx,
            self.text_params.clone(),
            record,
        )?;
        let (step_by_step, high_level) = parse::parse_explanation_parts(&completion.content);
        Ok(Explanation {
            step_by_step,
            high_level,
            iteration: previous.iteration + 1,
            verified: false,
        })
    }

    /// Full loop: reflect once, then draft/verify/(analyze+revise) until a
    /// verification passes or `max_iterations` drafts have been verified.
    pub fn run(
        &self,
        problem: &Problem,
        solution: &Solution,
        record: &mut RunRecord,
    ) -> Result<FaithfulnessOutcome, PipelineError> {
        if problem.public_tests.is_empty() {
            return Err(PipelineError::Contract(format!(
                "problem {} has no public tests",
                problem.id
            )));
        }

        let reflection = self.reflect(problem, record)?;
        let mut explanation = self.init_explanation(problem, solution, &reflection, record)?;
        let mut attempts: Vec<VerificationAttempt> = Vec::new();

        loop {
            let mut attempt = self.verify(problem, &explanation, record)?;
            if attempt.report.all_passed {
                explanation.verified = true;
                attempts.push(attempt);
                break;
            }
            if explanation.iteration + 1 >= self.config.max_iterations {
                // Budget spent: keep the last draft, unverified.
                attempts.push(attempt);
                break;
            }
            let analysis =
                self.analyze_failure(problem, solution, &reflection, &attempt, record)?;
            attempt.analysis = Some(analysis.clone());
            let previous = explanation;
            explanation = self.revise_explanation(
                problem,
                solution,
                &reflection,
                &previous,
                &attempt,
                &analysis,
                record,
            )?;
            attempts.push(attempt);
        }

        let best = attempts
            .iter()
            .max_by_key(|a| a.report.accepted_count())
            .expect("at least one attempt");
        record.log_best_attempt(
            best.iteration,
            best.report.accepted_count(),
            best.report.per_test.len(),
        );

        Ok(FaithfulnessOutcome {
            final_explanation: explanation,
            attempts,
            reflection,
        })
    }
}

/// Human-readable execution summary fed back into revision and analysis
/// prompts: verdict per test, with input, expected vs actual output, and
/// stderr for every failing test. Deliberately carries no wall-clock
/// numbers, so the prompt (and its cassette digest) is a deterministic
/// function of program behavior.
pub fn format_execution_for_prompt(tests: &[TestCase], report: &ExecutionReport) -> String {
    let mut out = String::new();
    for (i, result) in report.per_test.iter().enumerate() {
        out.push_str(&format!("Test {}: {}\n", i + 1, result.verdict));
        if result.verdict != Verdict::Accepted {
            if let Some(test) = tests.get(i) {
                out.push_str(&format!("  input: {:?}\n", test.input));
                out.push_str(&format!("  expected: {:?}\n", test.expected_output));
            }
            out.push_str(&format!("  actual: {:?}\n", result.actual_output));
            if !result.stderr.is_empty() {
                out.push_str(&format!("  stderr: {:?}\n", result.stderr));
            }
        }
    }
    out.push_str(if report.all_passed {
        "All public tests passed."
    } else {
        "Some public tests failed."
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;
    use crate::model::TestKind;

    fn echo_sum_problem() -> Problem {
        Problem {
            id: "echo-sum".into(),
            title: "Echo Sum".into(),
            description: "Read two integers from one line and print their sum.".into(),
            public_tests: vec![
                TestCase {
                    input: "3 4\n".into(),
                    expected_output: "7\n".into(),
                    kind: TestKind::Public,
                },
                TestCase {
                    input: "10 -2\n".into(),
                    expected_output: "8\n".into(),
                    kind: TestKind::Public,
                },
            ],
            scoring_tests: vec![TestCase {
                input: "1 1\n".into(),
                expected_output: "2\n".into(),
                kind: TestKind::Private,
            }],
            solutions: vec![oracle()],
        }
    }

    fn oracle() -> Solution {
        Solution {
            language_tag: "python3".into(),
            source: "a, b = map(int, input().split())\nprint(a + b)\n".into(),
        }
    }

    const REFLECTION: &str = "GOALS: sum two ints\nINPUTS: one line\nOUTPUTS: one int\nCONDITIONS: none\nOTHER: none";
    const DRAFT: &str = "STEP-BY-STEP:\nsplit the line, sum the parts\nHIGH-LEVEL:\nsimple addition";
    const VS_PASS: &str = "```python\nprint(sum(map(int, input().split())))\n```";
    const VS_FAIL: &str = "```python\nprint(42)\n```";

    fn run_loop(
        responses: Vec<&str>,
        max_iterations: u32,
    ) -> (FaithfulnessOutcome, RunRecord, ScriptedBackend) {
        let backend = ScriptedBackend::new(responses);
        let executor = SandboxExecutor::new();
        let config = LoopConfig {
            max_iterations,
            ..LoopConfig::default()
        };
        let fl = FaithfulnessLoop::new(&backend, &executor, &config, "python3");
        let mut record = RunRecord::start("echo-sum", None);
        let outcome = fl
            .run(&echo_sum_problem(), &oracle(), &mut record)
            .unwrap();
        (outcome, record, backend)
    }

    #[test]
    fn pass_at_first_draft_exits_after_one_attempt() {
        let (outcome, record, backend) = run_loop(vec![REFLECTION, DRAFT, VS_PASS], 4);
        assert_eq!(outcome.attempts.len(), 1);
        assert_eq!(outcome.final_explanation.iteration, 0);
        assert!(outcome.final_explanation.verified);
        assert!(outcome.attempts[0].analysis.is_none());
        assert_eq!(backend.remaining(), 0);
        assert_eq!(outcome.reflection.goals, "sum two ints");
        assert!(record
            .events()
            .iter()
            .any(|e| e.stage == crate::record::STAGE_EXECUTION));
    }

    #[test]
    fn never_passing_fixture_spends_the_full_budget() {
        // 4 drafts verified: reflect, init, then per round vs / analysis /
        // revision, ending with the 4th failing verification.
        let responses = vec![
            REFLECTION, DRAFT, VS_FAIL, "analysis 0", DRAFT, VS_FAIL, "analysis 1", DRAFT,
            VS_FAIL, "analysis 2", DRAFT, VS_FAIL,
        ];
        let (outcome, _record, backend) = run_loop(responses, 4);
        assert_eq!(outcome.attempts.len(), 4);
        assert_eq!(outcome.final_explanation.iteration, 3);
        assert!(!outcome.final_explanation.verified);
        let analyses: Vec<bool> = outcome.attempts.iter().map(|a| a.analysis.is_some()).collect();
        assert_eq!(analyses, vec![true, true, true, false]);
        assert_eq!(backend.remaining(), 0);
    }

    #[test]
    fn pass_at_third_draft_leaves_two_analyses() {
        let responses = vec![
            REFLECTION, DRAFT, VS_FAIL, "analysis 0", DRAFT, VS_FAIL, "analysis 1", DRAFT,
            VS_PASS,
        ];
        let (outcome, _record, _backend) = run_loop(responses, 4);
        assert_eq!(outcome.attempts.len(), 3);
        assert_eq!(
            outcome
                .attempts
                .iter()
                .filter(|a| a.analysis.is_some())
                .count(),
            2
        );
        assert!(outcome.final_explanation.verified);
        assert_eq!(outcome.final_explanation.iteration, 2);
        // Iterations are gap-free and match attempt order.
        for (i, attempt) in outcome.attempts.iter().enumerate() {
            assert_eq!(attempt.iteration as usize, i);
        }
    }

    #[test]
    fn missing_code_block_degrades_to_runtime_errors() {
        let backend = ScriptedBackend::new(["sorry, I cannot write code today"]);
        let executor = SandboxExecutor::new();
        let config = LoopConfig::default();
        let fl = FaithfulnessLoop::new(&backend, &executor, &config, "python3");
        let mut record = RunRecord::start("echo-sum", None);
        let explanation = Explanation {
            step_by_step: "s".into(),
            high_level: "h".into(),
            iteration: 0,
            verified: false,
        };
        let attempt = fl
            .verify(&echo_sum_problem(), &explanation, &mut record)
            .unwrap();
        assert!(!attempt.report.all_passed);
        assert_eq!(attempt.report.per_test.len(), 2);
        assert!(attempt
            .report
            .per_test
            .iter()
            .all(|t| t.verdict == Verdict::RuntimeError));
        assert!(attempt.report.per_test[0].stderr.contains("no fenced code block"));
    }

    #[test]
    fn verification_prompts_never_contain_the_oracle_solution() {
        let responses = vec![
            REFLECTION, DRAFT, VS_FAIL, "analysis 0", DRAFT, VS_PASS,
        ];
        let (_outcome, record, _backend) = run_loop(responses, 4);
        let texts = record.prompt_texts_of_kind("gen_verification_solution");
        assert_eq!(texts.len(), 2);
        for text in texts {
            assert!(!text.contains(&oracle().source));
            assert!(!text.contains("a, b = map(int"));
        }
    }

    #[test]
    fn analyze_failure_rejects_passed_attempts() {
        let backend = ScriptedBackend::new(Vec::<String>::new());
        let executor = SandboxExecutor::new();
        let config = LoopConfig::default();
        let fl = FaithfulnessLoop::new(&backend, &executor, &config, "python3");
        let mut record = RunRecord::start("p", None);
        let attempt = VerificationAttempt {
            iteration: 0,
            verification_source: "print(7)".into(),
            report: ExecutionReport::new(vec![TestResult {
                verdict: Verdict::Accepted,
                actual_output: "7\n".into(),
                stderr: String::new(),
                wall_time_ms: 1,
            }]),
            analysis: None,
        };
        let err = fl.analyze_failure(
            &echo_sum_problem(),
            &oracle(),
            &ProblemReflection::default(),
            &attempt,
            &mut record,
        );
        assert!(matches!(err, Err(PipelineError::Contract(_))));
    }

    #[test]
    fn revision_prompt_carries_all_seven_inputs() {
        let responses = vec![
            REFLECTION, DRAFT, VS_FAIL, "the analysis text", DRAFT, VS_PASS,
        ];
        let (_outcome, record, _backend) = run_loop(responses, 4);
        let texts = record.prompt_texts_of_kind("revise_explanation");
        assert_eq!(texts.len(), 1);
        let text = &texts[0];
        assert!(text.contains("Read two integers"));
        assert!(text.contains("a, b = map(int")); // oracle solution is allowed here
        assert!(text.contains("sum two ints")); // reflection
        assert!(text.contains("split the line")); // previous explanation
        assert!(text.contains("print(42)")); // verification source
        assert!(text.contains("Test 1")); // execution results
        assert!(text.contains("the analysis text"));
    }

    #[test]
    fn run_requires_public_tests() {
        let backend = ScriptedBackend::new(Vec::<String>::new());
        let executor = SandboxExecutor::new();
        let config = LoopConfig::default();
        let fl = FaithfulnessLoop::new(&backend, &executor, &config, "python3");
        let mut record = RunRecord::start("p", None);
        let mut problem = echo_sum_problem();
        problem.public_tests.clear();
        assert!(matches!(
            fl.run(&problem, &oracle(), &mut record),
            Err(PipelineError::Contract(_))
        ));
    }
}
