//! Command implementations. Every function takes already-built backends so
//! the surface stays testable against scripted cassettes.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use critique_forge::config::ForgeConfig;
use critique_forge::corpus::{
    load_histories, load_problems, Corpus, Split, UserHistory,
};
use critique_forge::eval::{
    aggregate, rouge_l, tokenize, win_rate, word_overlap_ratio, ComparisonUnit, Metric,
    MetricReport, UnitValue,
};
use critique_forge::gateway::ChatBackend;
use critique_forge::model::UserInquiry;
use critique_forge::record::RunRecord;
use critique_forge::runner::{
    build_executor, eval_pass_at_k as run_pass_at_k, persist_run, read_finals, CompletedRun,
    Engine, Method, StoredFinal,
};

fn emit(value: serde_json::Value) {
    println!("{value}");
}

/// Cassette used by this invocation, if any; recorded into the run record
/// so stored runs can be traced back to their recordings.
#[derive(Debug, Clone, Copy)]
pub enum CassetteMode {
    Record,
    Replay,
}

#[derive(Debug, Clone)]
pub struct CassetteRef {
    pub path: std::path::PathBuf,
    pub mode: CassetteMode,
}

impl CassetteRef {
    fn annotate(&self, record: &mut RunRecord) {
        let digest = critique_forge::util::file_digest(&self.path)
            .unwrap_or_else(|_| "unreadable".into());
        record.append(
            "cassette",
            serde_json::json!({
                "path": self.path,
                "mode": match self.mode {
                    CassetteMode::Record => "record",
                    CassetteMode::Replay => "replay",
                },
                "digest": digest,
            }),
        );
    }
}

fn annotate_cassette(record: &mut RunRecord, cassette: Option<&CassetteRef>) {
    if let Some(cassette) = cassette {
        cassette.annotate(record);
    }
}

fn load_corpus(config: &ForgeConfig, path: &Path, split: Split) -> anyhow::Result<Corpus> {
    let (corpus, report) = load_problems(path, split, &config.ingest_options())?;
    log::info!(
        "loaded {} problems ({} dropped: {} image, {} no-solution, {} no-tests)",
        report.kept,
        report.input_lines - report.kept,
        report.dropped_image,
        report.dropped_no_solution,
        report.dropped_no_tests
    );
    Ok(corpus)
}

fn find_history(histories: Vec<UserHistory>, user: &str) -> anyhow::Result<UserHistory> {
    histories
        .into_iter()
        .find(|h| h.user_id == user)
        .with_context(|| format!("user '{user}' not found in histories"))
}

fn report_run(
    mut run: CompletedRun,
    out: &Path,
    cassette: Option<&CassetteRef>,
) -> anyhow::Result<()> {
    annotate_cassette(&mut run.record, cassette);
    let paths = persist_run(out, &run)?;
    match &run.result {
        Ok(output) => {
            emit(serde_json::json!({
                "event": "run_complete",
                "run_id": run.record.run_id,
                "problem_id": run.record.problem_id,
                "user_id": run.record.user_id,
                "verified": output.faithful.verified,
                "record_path": paths.record,
                "final_path": paths.final_output,
            }));
            Ok(())
        }
        Err(err) => {
            emit(serde_json::json!({
                "event": "run_failed",
                "run_id": run.record.run_id,
                "problem_id": run.record.problem_id,
                "error": err.to_string(),
                "record_path": paths.record,
            }));
            bail!("run {} failed: {err}", run.record.run_id);
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn explain(
    config: &ForgeConfig,
    backend: &dyn ChatBackend,
    judge: &dyn ChatBackend,
    problems: &Path,
    problem_id: &str,
    split: Split,
    out: &Path,
    cassette: Option<&CassetteRef>,
) -> anyhow::Result<()> {
    let corpus = load_corpus(config, problems, split)?;
    let problem = corpus
        .find(problem_id)
        .with_context(|| format!("problem '{problem_id}' not in corpus after filtering"))?;
    let executor = build_executor(config);
    let engine = Engine {
        backend,
        judge_backend: judge,
        config,
        executor: &executor,
    };
    report_run(engine.run_explain(problem), out, cassette)
}

#[allow(clippy::too_many_arguments)]
pub fn pipeline(
    config: &ForgeConfig,
    backend: &dyn ChatBackend,
    judge: &dyn ChatBackend,
    problems: &Path,
    histories: &Path,
    user: &str,
    problem_id: &str,
    split: Split,
    out: &Path,
    cassette: Option<&CassetteRef>,
) -> anyhow::Result<()> {
    let corpus = load_corpus(config, problems, split)?;
    let problem = corpus
        .find(problem_id)
        .with_context(|| format!("problem '{problem_id}' not in corpus after filtering"))?;
    let (all_histories, _) = load_histories(histories)?;
    let history = find_history(all_histories, user)?;
    let executor = build_executor(config);
    let engine = Engine {
        backend,
        judge_backend: judge,
        config,
        executor: &executor,
    };
    report_run(engine.run_pipeline(problem, &history), out, cassette)
}

#[allow(clippy::too_many_arguments)]
pub fn eval_pass_at_k(
    config: &ForgeConfig,
    backend: &dyn ChatBackend,
    judge: &dyn ChatBackend,
    problems: &Path,
    method: Method,
    samples: u32,
    ks: &[u32],
    limit: Option<usize>,
    parallel: usize,
    split: Split,
    out: &Path,
    cassette: Option<&CassetteRef>,
) -> anyhow::Result<()> {
    let corpus = load_corpus(config, problems, split)?;
    let mut problem_list = corpus.problems;
    if let Some(limit) = limit {
        problem_list.truncate(limit);
    }

    let executor = build_executor(config);
    let engine = Engine {
        backend,
        judge_backend: judge,
        config,
        executor: &executor,
    };
    let label = format!("eval:pass-at-k:{}", method.name());
    let mut record = RunRecord::start(&label, None);
    let eval = run_pass_at_k(
        &engine,
        &problem_list,
        method,
        samples,
        ks,
        parallel,
        &mut record,
    )?;

    annotate_cassette(&mut record, cassette);
    let record_path = out.join(format!("{}.jsonl", record.run_id));
    record.write_to(&record_path)?;

    for (problem_id, solve) in &eval.per_problem {
        emit(serde_json::json!({
            "event": "solve_rate",
            "problem_id": problem_id,
            "method": method.name(),
            "n": solve.n,
            "c": solve.c,
            "pass_at": solve.pass_at,
        }));
    }
    eprintln!(
        "pass@k over {} problems, method {}, {} samples{}:",
        eval.per_problem.len(),
        method.name(),
        eval.samples_used,
        if eval.failed_problems.is_empty() {
            String::new()
        } else {
            format!(" ({} failed)", eval.failed_problems.len())
        }
    );
    for (k, report) in &eval.reports {
        emit(serde_json::json!({
            "event": "metric_report",
            "metric": "pass_at_k",
            "k": k,
            "method": method.name(),
            "mean": report.mean,
            "std": report.std,
            "n_units": report.n_units,
            "failed_problems": eval.failed_problems,
            "record_path": record_path,
        }));
        eprintln!("  pass@{k}: {}  (n_units={})", report.format_summary(), report.n_units);
    }
    Ok(())
}

fn inquiry_text(inquiry: &UserInquiry) -> String {
    format!("{} {} {}", inquiry.title, inquiry.tags.join(" "), inquiry.body)
}

pub fn eval_text_metrics(runs: &Path, histories: &Path) -> anyhow::Result<()> {
    let finals = read_finals(runs)?;
    let (all_histories, _) = load_histories(histories)?;
    let by_user: BTreeMap<&str, &UserHistory> = all_histories
        .iter()
        .map(|h| (h.user_id.as_str(), h))
        .collect();

    let mut rouge_units = Vec::new();
    let mut overlap_units = Vec::new();
    let mut skipped = 0usize;
    for (stem, stored) in &finals {
        let Some(personalized) = &stored.final_output.personalized else {
            log::warn!("{stem}: no personalized explanation, skipped");
            skipped += 1;
            continue;
        };
        let Some(user_id) = &stored.user_id else {
            log::warn!("{stem}: no user id, skipped");
            skipped += 1;
            continue;
        };
        let Some(history) = by_user.get(user_id.as_str()) else {
            log::warn!("{stem}: user '{user_id}' not in histories, skipped");
            skipped += 1;
            continue;
        };

        let candidate = tokenize(&personalized.body);
        let reference: Vec<String> = history
            .inquiries
            .iter()
            .flat_map(|i| tokenize(&inquiry_text(i)))
            .collect();
        let score = rouge_l(&candidate, &reference);
        rouge_units.push(UnitValue {
            unit_id: stem.clone(),
            value: score.f,
        });

        let queries: Vec<String> = history.inquiries.iter().map(inquiry_text).collect();
        match word_overlap_ratio(&personalized.body, &queries) {
            Ok(ratio) => overlap_units.push(UnitValue {
                unit_id: stem.clone(),
                value: ratio,
            }),
            Err(err) => {
                log::warn!("{stem}: {err}, skipped from word overlap");
                skipped += 1;
            }
        }
    }

    if rouge_units.is_empty() {
        bail!("no scorable personalized explanations under {}", runs.display());
    }
    let rouge_report = aggregate(Metric::RougeL, rouge_units)?;
    let overlap_report = aggregate(Metric::WordOverlap, overlap_units)?;
    for report in [&rouge_report, &overlap_report] {
        emit(serde_json::json!({
            "event": "metric_report",
            "metric": report.metric,
            "mean": report.mean,
            "std": report.std,
            "n_units": report.n_units,
            "skipped_units": skipped,
        }));
    }
    print_metric_table(&[("Rouge-L", &rouge_report), ("Word Overlap", &overlap_report)]);
    Ok(())
}

fn print_metric_table(reports: &[(&str, &MetricReport)]) {
    for (name, report) in reports {
        eprintln!("  {name}: {}  (n_units={})", report.format_summary(), report.n_units);
    }
}

/// Pairs stored runs by (user, problem) in run order; the i-th run of a is
/// compared against the i-th run of b.
fn pair_finals(
    a: Vec<(String, StoredFinal)>,
    b: Vec<(String, StoredFinal)>,
) -> Vec<((String, StoredFinal), (String, StoredFinal))> {
    fn grouped(
        finals: Vec<(String, StoredFinal)>,
    ) -> BTreeMap<(String, String), Vec<(String, StoredFinal)>> {
        let mut map: BTreeMap<(String, String), Vec<(String, StoredFinal)>> = BTreeMap::new();
        for (stem, stored) in finals {
            let key = (
                stored.user_id.clone().unwrap_or_default(),
                stored.problem_id.clone(),
            );
            map.entry(key).or_default().push((stem, stored));
        }
        map
    }
    let mut a_groups = grouped(a);
    let b_groups = grouped(b);
    let mut pairs = Vec::new();
    for (key, b_list) in b_groups {
        let Some(a_list) = a_groups.remove(&key) else {
            log::warn!("unit {key:?} present only in runs-b, skipped");
            continue;
        };
        if a_list.len() != b_list.len() {
            log::warn!(
                "unit {key:?}: {} runs in a vs {} in b; comparing the overlap",
                a_list.len(),
                b_list.len()
            );
        }
        pairs.extend(a_list.into_iter().zip(b_list));
    }
    for key in a_groups.keys() {
        log::warn!("unit {key:?} present only in runs-a, skipped");
    }
    pairs
}

#[allow(clippy::too_many_arguments)]
pub fn eval_win_rate(
    config: &ForgeConfig,
    judge: &dyn ChatBackend,
    runs_a: &Path,
    runs_b: &Path,
    histories: &Path,
    problems: &Path,
    split: Split,
    out: &Path,
    cassette: Option<&CassetteRef>,
) -> anyhow::Result<()> {
    let corpus = load_corpus(config, problems, split)?;
    let (all_histories, _) = load_histories(histories)?;
    let finals_a = read_finals(runs_a)?;
    let finals_b = read_finals(runs_b)?;

    let mut units = Vec::new();
    for ((stem_a, a), (stem_b, b)) in pair_finals(finals_a, finals_b) {
        let (Some(pe_a), Some(pe_b)) = (
            &a.final_output.personalized,
            &b.final_output.personalized,
        ) else {
            log::warn!("{stem_a} / {stem_b}: missing personalized explanation, skipped");
            continue;
        };
        let Some(problem) = corpus.find(&a.problem_id) else {
            log::warn!("{stem_a}: problem '{}' not in corpus, skipped", a.problem_id);
            continue;
        };
        let Some(profile) = a.profile.as_ref().or(b.profile.as_ref()) else {
            log::warn!("{stem_a}: no stored profile to role-play, skipped");
            continue;
        };
        if let Some(user_id) = &a.user_id {
            if !all_histories.iter().any(|h| &h.user_id == user_id) {
                log::warn!("{stem_a}: user '{user_id}' not in histories");
            }
        }
        let solution = problem
            .oracle_solution()
            .map(|s| s.source.clone())
            .unwrap_or_default();
        units.push(ComparisonUnit {
            unit_id: format!(
                "{}/{}/{}",
                a.user_id.clone().unwrap_or_default(),
                a.problem_id,
                units.len()
            ),
            profile: profile.raw.clone(),
            problem: problem.description.clone(),
            solution,
            candidate_a: pe_a.body.clone(),
            candidate_b: pe_b.body.clone(),
        });
    }
    if units.is_empty() {
        bail!("no comparable run pairs between the two directories");
    }

    let mut record = RunRecord::start("eval:win-rate", None);
    let outcome = win_rate(&units, judge, &config.text_params(), &mut record)?;
    annotate_cassette(&mut record, cassette);
    let record_path = out.join(format!("{}.jsonl", record.run_id));
    record.write_to(&record_path)?;

    emit(serde_json::json!({
        "event": "metric_report",
        "metric": "win_rate",
        "mean": outcome.report.mean,
        "std": outcome.report.std,
        "n_units": outcome.report.n_units,
        "flagged_units": outcome.flagged_units,
        "record_path": record_path,
    }));
    eprintln!(
        "  win rate (A over B): {}  (n_units={}, flagged={})",
        outcome.report.format_summary(),
        outcome.report.n_units,
        outcome.flagged_units.len()
    );
    Ok(())
}

pub fn ingest_validate(
    config: &ForgeConfig,
    problems: &Path,
    histories: Option<&Path>,
    split: Split,
) -> anyhow::Result<()> {
    let (corpus, report) = load_problems(problems, split, &config.ingest_options())?;
    let history_summary = match histories {
        Some(path) => {
            let (loaded, skipped) = load_histories(path)?;
            Some(serde_json::json!({
                "users": loaded.len(),
                "skipped_inquiries": skipped,
                "inquiries": loaded.iter().map(|h| h.inquiries.len()).sum::<usize>(),
            }))
        }
        None => None,
    };

    emit(serde_json::json!({
        "event": "ingest_report",
        "problems": report,
        "conserves": report.conserves(),
        "kept_ids": corpus.problems.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(),
        "histories": history_summary,
    }));
    eprintln!(
        "problems: {} in, {} kept, {} image, {} no-solution, {} no-tests (conserves: {})",
        report.input_lines,
        report.kept,
        report.dropped_image,
        report.dropped_no_solution,
        report.dropped_no_tests,
        report.conserves()
    );
    Ok(())
}
