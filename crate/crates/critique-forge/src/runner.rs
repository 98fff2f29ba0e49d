//! Run orchestration: the explain/pipeline entry points the CLI calls, the
//! baseline and self-selection reference methods, batch pass@k evaluation,
//! and run persistence (one record file plus one final-output file per run).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ForgeConfig;
use crate::corpus::UserHistory;
use crate::error::PipelineError;
use crate::eval::{
    aggregate, solve_rate_for_problem, Metric, MetricReport, SolveRate, SolveSettings, UnitValue,
};
use crate::executor::{default_interpreters, SandboxExecutor};
use crate::faithfulness::FaithfulnessLoop;
use crate::gateway::{ChatBackend, ChatRequest};
use crate::model::{
    assemble_final, Explanation, FinalOutput, Problem, ProblemReflection, Solution, UserProfile,
};
use crate::parse;
use crate::personalization::PersonalizationLoop;
use crate::prompt::render_selection;
use crate::record::RunRecord;
use crate::util::{atomic_write, parallel_map};

/// Explanation-producing strategies compared by the eval harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// One completion, no loops.
    Baseline,
    /// n sampled candidates plus one ranking completion.
    SelfSelection,
    /// The full faithfulness loop.
    SelfIteration,
}

impl Method {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "baseline" => Some(Method::Baseline),
            "self-selection" => Some(Method::SelfSelection),
            "self-iteration" => Some(Method::SelfIteration),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::SelfSelection => "self-selection",
            Method::SelfIteration => "self-iteration",
        }
    }
}

/// Everything a run needs: backends, executor, and configuration.
pub struct Engine<'a> {
    pub backend: &'a dyn ChatBackend,
    pub judge_backend: &'a dyn ChatBackend,
    pub config: &'a ForgeConfig,
    pub executor: &'a SandboxExecutor,
}

/// A finished (or failed) run: the record always exists; the output only on
/// success. Failed runs carry a `run_failed` event in the record.
pub struct CompletedRun {
    pub record: RunRecord,
    pub result: Result<FinalOutput, PipelineError>,
    pub profile: Option<UserProfile>,
}

/// Builds the sandbox executor from config (built-in interpreters merged
/// with configured extras).
pub fn build_executor(config: &ForgeConfig) -> SandboxExecutor {
    let mut interpreters = default_interpreters();
    for (tag, argv) in &config.executor.interpreters {
        interpreters.insert(tag.clone(), argv.clone());
    }
    SandboxExecutor::with_interpreters(interpreters)
}

impl Engine<'_> {
    fn faithfulness_loop(&self) -> FaithfulnessLoop<'_> {
        FaithfulnessLoop {
            backend: self.backend,
            executor: self.executor,
            config: &self.config.loops,
            code_params: self.config.code_params(),
            text_params: self.config.text_params(),
            language_tag: &self.config.executor.language,
            exec_limits: self.config.exec_limits(),
        }
    }

    fn personalization_loop(&self) -> PersonalizationLoop<'_> {
        PersonalizationLoop {
            backend: self.backend,
            judge_backend: self.judge_backend,
            config: &self.config.loops,
            text_params: self.config.text_params(),
        }
    }

    pub fn solve_settings(&self) -> SolveSettings {
        SolveSettings {
            language_tag: self.config.executor.language.clone(),
            code_params: self.config.code_params(),
            exec_limits: self.config.exec_limits(),
        }
    }

    fn oracle<'p>(&self, problem: &'p Problem) -> Result<&'p Solution, PipelineError> {
        problem.oracle_solution().ok_or_else(|| {
            PipelineError::Contract(format!("problem {} has no oracle solution", problem.id))
        })
    }

    /// Faithfulness loop only; the final output has no personalized part.
    pub fn run_explain(&self, problem: &Problem) -> CompletedRun {
        let mut record = RunRecord::start(&problem.id, None);
        let result = (|| {
            let solution = self.oracle(problem)?;
            let outcome = self.faithfulness_loop().run(problem, solution, &mut record)?;
            Ok(assemble_final(outcome.final_explanation, None))
        })();
        finish_run(&mut record, result, None)
    }

    /// Both loops: faithful explanation, then personalization against the
    /// user's history.
    pub fn run_pipeline(&self, problem: &Problem, history: &UserHistory) -> CompletedRun {
        let mut record = RunRecord::start(&problem.id, Some(&history.user_id));
        let mut profile = None;
        let result = (|| {
            let solution = self.oracle(problem)?;
            let faithful = self
                .faithfulness_loop()
                .run(problem, solution, &mut record)?
                .final_explanation;
            let personalization = self.personalization_loop().run(
                problem,
                solution,
                &faithful,
                &history.inquiries,
                &mut record,
            )?;
            profile = Some(personalization.profile);
            Ok(assemble_final(
                faithful,
                Some(personalization.final_personalized),
            ))
        })();
        finish_run(&mut record, result, profile)
    }

    /// Produces a faithful explanation with the given strategy. Baseline
    /// and self-selection skip reflection and verification entirely.
    pub fn explanation_for_method(
        &self,
        method: Method,
        problem: &Problem,
        record: &mut RunRecord,
    ) -> Result<Explanation, PipelineError> {
        let solution = self.oracle(problem)?;
        let fl = self.faithfulness_loop();
        match method {
            Method::Baseline => {
                fl.init_explanation(problem, solution, &ProblemReflection::default(), record)
            }
            Method::SelfSelection => {
                let n = self.config.loops.samples_per_problem.max(1);
                let candidates: Vec<Explanation> = (0..n)
                    .map(|_| {
                        fl.init_explanation(
                            problem,
                            solution,
                            &ProblemReflection::default(),
                            record,
                        )
                    })
                    .collect::<Result<_, _>>()?;

                let texts: Vec<String> = candidates.iter().map(Explanation::to_text).collect();
                let messages =
                    render_selection(&problem.description, &solution.source, &texts);
                record.log_prompt("select_explanation", &messages);
                let completion = self
                    .backend
                    .complete(&ChatRequest::new(messages, self.config.text_params()))?;
                record.log_completion("select_explanation", &completion);

                let parsed = parse::parse_selection(&completion.content)
                    .filter(|&i| i >= 1 && i <= candidates.len());
                let index = match parsed {
                    Some(i) => i - 1,
                    None => {
                        log::warn!(
                            "selection unparseable for problem {}; using first candidate",
                            problem.id
                        );
                        0
                    }
                };
                record.append(
                    "selection",
                    serde_json::json!({ "selected": index + 1, "parsed": parsed.is_some() }),
                );
                Ok(candidates.into_iter().nth(index).expect("index in range"))
            }
            Method::SelfIteration => {
                Ok(fl.run(problem, solution, record)?.final_explanation)
            }
        }
    }
}

fn finish_run(
    record: &mut RunRecord,
    result: Result<FinalOutput, PipelineError>,
    profile: Option<UserProfile>,
) -> CompletedRun {
    match &result {
        Ok(output) => record.log_final(output),
        Err(err) => record.log_failed(&err.to_string()),
    }
    CompletedRun {
        record: record.clone(),
        result,
        profile,
    }
}

/// The deterministic run artifact stored next to the record: no run id, no
/// timestamps, so replayed runs produce byte-identical files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredFinal {
    pub problem_id: String,
    pub user_id: Option<String>,
    pub profile: Option<UserProfile>,
    pub final_output: FinalOutput,
}

/// Written paths for one persisted run.
pub struct RunPaths {
    pub record: PathBuf,
    pub final_output: Option<PathBuf>,
}

/// Persists a run under `dir`: `<run_id>.jsonl` always, plus
/// `<run_id>.final.json` when the run completed. Writes are atomic.
pub fn persist_run(dir: &Path, run: &CompletedRun) -> std::io::Result<RunPaths> {
    let record_path = dir.join(format!("{}.jsonl", run.record.run_id));
    run.record.write_to(&record_path)?;

    let final_path = match &run.result {
        Ok(output) => {
            let stored = StoredFinal {
                problem_id: run.record.problem_id.clone(),
                user_id: run.record.user_id.clone(),
                profile: run.profile.clone(),
                final_output: output.clone(),
            };
            let path = dir.join(format!("{}.final.json", run.record.run_id));
            let mut bytes = serde_json::to_vec(&stored).expect("stored final serializes");
            bytes.push(b'\n');
            atomic_write(&path, &bytes)?;
            Some(path)
        }
        Err(_) => None,
    };
    Ok(RunPaths {
        record: record_path,
        final_output: final_path,
    })
}

/// Loads every `*.final.json` under `dir`, sorted by file name (and so by
/// run start time, given the run-id scheme).
pub fn read_finals(dir: &Path) -> std::io::Result<Vec<(String, StoredFinal)>> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix(".final.json") {
            let text = std::fs::read_to_string(&path)?;
            let stored: StoredFinal = serde_json::from_str(&text).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}: {e}", path.display()),
                )
            })?;
            found.push((stem.to_string(), stored));
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(found)
}

/// Outcome of a batch pass@k evaluation.
#[derive(Debug)]
pub struct PassAtKEval {
    /// Problem id -> solve rate, for problems that completed.
    pub per_problem: Vec<(String, SolveRate)>,
    /// One aggregated report per requested k.
    pub reports: BTreeMap<u32, MetricReport>,
    /// Problems excluded after gateway/executor errors.
    pub failed_problems: Vec<String>,
    /// Sample count actually used (raised to max k when necessary).
    pub samples_used: u32,
}

/// Runs `method` on every problem and scores the resulting explanations by
/// sampling solutions against the scoring tests. When a requested k exceeds
/// the sample budget, the budget is raised to k (and reported).
pub fn eval_pass_at_k(
    engine: &Engine<'_>,
    problems: &[Problem],
    method: Method,
    samples: u32,
    ks: &[u32],
    parallel: usize,
    record: &mut RunRecord,
) -> Result<PassAtKEval, PipelineError> {
    if problems.is_empty() {
        return Err(PipelineError::Contract("no problems to evaluate".into()));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(PipelineError::Contract(
            "pass@k needs at least one k >= 1".into(),
        ));
    }
    let max_k = *ks.iter().max().expect("non-empty");
    let samples_used = if max_k > samples {
        log::warn!(
            "pass@{max_k} requested with only {samples} samples; raising samples to {max_k}"
        );
        max_k
    } else {
        samples
    };

    let settings = engine.solve_settings();
    let units: Vec<&Problem> = problems.iter().collect();
    let results = parallel_map(units, parallel, |problem| {
        let mut unit_record = RunRecord::new(
            format!("{}/{}", record.run_id, problem.id),
            &problem.id,
            None,
        );
        let outcome = (|| {
            let explanation =
                engine.explanation_for_method(method, problem, &mut unit_record)?;
            solve_rate_for_problem(
                engine.backend,
                engine.executor,
                problem,
                &explanation,
                samples_used,
                ks,
                &settings,
                &mut unit_record,
            )
        })();
        (problem.id.clone(), unit_record, outcome)
    });

    let mut per_problem = Vec::new();
    let mut failed_problems = Vec::new();
    for (problem_id, unit_record, outcome) in results {
        record.merge_events(unit_record);
        match outcome {
            Ok(solve) => per_problem.push((problem_id, solve)),
            Err(err) => {
                log::warn!("problem {problem_id} excluded from aggregation: {err}");
                failed_problems.push(problem_id);
            }
        }
    }
    if per_problem.is_empty() {
        return Err(PipelineError::Contract(
            "every problem failed; nothing to aggregate".into(),
        ));
    }

    let mut reports = BTreeMap::new();
    for &k in ks {
        let per_unit: Vec<UnitValue> = per_problem
            .iter()
            .map(|(id, solve)| UnitValue {
                unit_id: id.clone(),
                value: solve.pass_at[&k],
            })
            .collect();
        let report = aggregate(Metric::PassAtK, per_unit)
            .map_err(|e| PipelineError::Contract(e.to_string()))?;
        reports.insert(k, report);
    }

    Ok(PassAtKEval {
        per_problem,
        reports,
        failed_problems,
        samples_used,
    })
}
