//! Pairwise win rate under a role-playing judge, with position-swap
//! debiasing: every unit is judged twice with the candidates' positions
//! exchanged, and a split decision counts as a tie.

use crate::error::PipelineError;
use crate::gateway::{ChatBackend, ChatRequest};
use crate::model::GenerationParams;
use crate::parse::{self, ComparisonWinner};
use crate::prompt::{self, templates, ContextField, PromptContext, PromptKind};
use crate::record::RunRecord;

use super::{aggregate, Metric, MetricReport, UnitValue};

/// One aligned comparison: the same user, problem, and sample index across
/// two methods.
#[derive(Debug, Clone)]
pub struct ComparisonUnit {
    pub unit_id: String,
    /// Raw profile text the judge role-plays.
    pub profile: String,
    /// Problem description.
    pub problem: String,
    /// Oracle solution source.
    pub solution: String,
    /// Method A's personalized explanation.
    pub candidate_a: String,
    /// Method B's personalized explanation.
    pub candidate_b: String,
}

#[derive(Debug)]
pub struct WinRateOutcome {
    /// Mean unit score for method A (1 = swept both orderings).
    pub report: MetricReport,
    /// Units scored 0.5 because the judge's verdict stayed unparseable
    /// after the re-ask.
    pub flagged_units: Vec<String>,
}

/// Asks the judge once for the pair as presented; `None` when the verdict
/// line stays unparseable after the one strict re-ask.
fn ask_winner(
    judge: &dyn ChatBackend,
    params: &GenerationParams,
    unit: &ComparisonUnit,
    first: &str,
    second: &str,
    record: &mut RunRecord,
) -> Result<Option<ComparisonWinner>, PipelineError> {
    let ctx = PromptContext::new()
        .with(ContextField::Profile, &unit.profile)
        .with(ContextField::Problem, &unit.problem)
        .with(ContextField::Solution, &unit.solution)
        .with(ContextField::CandidateA, first)
        .with(ContextField::CandidateB, second);
    let kind = PromptKind::JudgeCompare;

    let messages = prompt::render(kind, &ctx)?;
    record.log_prompt(kind.name(), &messages);
    let completion = judge.complete(&ChatRequest::new(messages, params.clone()))?;
    record.log_completion(kind.name(), &completion);
    if let Some(winner) = parse::parse_winner(&completion.content) {
        return Ok(Some(winner));
    }

    let mut messages = prompt::render(kind, &ctx)?;
    messages[1].content = format!(
        "{}\n\n{}",
        messages[1].content,
        templates::JUDGE_COMPARE_STRICT
    );
    record.log_prompt(kind.name(), &messages);
    let retry = judge.complete(&ChatRequest::new(messages, params.clone()))?;
    record.log_completion(kind.name(), &retry);
    Ok(parse::parse_winner(&retry.content))
}

/// Scores method A against method B over aligned units. Per unit: 1 when
/// both orderings pick A's content, 0 when both pick B's, 0.5 when the
/// orderings disagree (position bias) or the verdicts stay unparseable.
pub fn win_rate(
    units: &[ComparisonUnit],
    judge: &dyn ChatBackend,
    params: &GenerationParams,
    record: &mut RunRecord,
) -> Result<WinRateOutcome, PipelineError> {
    if units.is_empty() {
        return Err(PipelineError::Contract(
            "win_rate requires at least one comparison unit".into(),
        ));
    }
    let mut per_unit = Vec::with_capacity(units.len());
    let mut flagged_units = Vec::new();

    for unit in units {
        let forward = ask_winner(judge, params, unit, &unit.candidate_a, &unit.candidate_b, record)?;
        let swapped = ask_winner(judge, params, unit, &unit.candidate_b, &unit.candidate_a, record)?;
        let score = match (forward, swapped) {
            (Some(first), Some(second)) => {
                // A wins the forward round in position A, and the swapped
                // round in position B.
                let a_forward = first == ComparisonWinner::PositionA;
                let a_swapped = second == ComparisonWinner::PositionB;
                (a_forward as u8 + a_swapped as u8) as f64 / 2.0
            }
            _ => {
                log::warn!("unit {}: judge verdict unparseable, scoring 0.5", unit.unit_id);
                flagged_units.push(unit.unit_id.clone());
                0.5
            }
        };
        per_unit.push(UnitValue {
            unit_id: unit.unit_id.clone(),
            value: score,
        });
    }

    let report = aggregate(Metric::WinRate, per_unit)
        .map_err(|e| PipelineError::Contract(e.to_string()))?;
    Ok(WinRateOutcome {
        report,
        flagged_units,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Completion, FinishReason, GatewayError};

    fn units(n: usize) -> Vec<ComparisonUnit> {
        (0..n)
            .map(|i| ComparisonUnit {
                unit_id: format!("u{i}"),
                profile: "beginner pythonista".into(),
                problem: "sum two ints".into(),
                solution: "print(sum(map(int, input().split())))".into(),
                candidate_a: format!("CAND-A body {i}"),
                candidate_b: format!("CAND-B body {i}"),
            })
            .collect()
    }

    /// Judge that always answers by presented position.
    struct PositionBiasedJudge;

    impl ChatBackend for PositionBiasedJudge {
        fn complete(&self, _request: &ChatRequest) -> Result<Completion, GatewayError> {
            Ok(Completion {
                content: "looks better placed first.\nWINNER: A".into(),
                finish_reason: FinishReason::Stop,
                backend_id: self.id(),
                latency_ms: 0,
            })
        }
        fn id(&self) -> String {
            "position-biased".into()
        }
    }

    /// Judge that always prefers whichever position holds the marker text.
    struct ContentJudge {
        marker: &'static str,
    }

    impl ChatBackend for ContentJudge {
        fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
            let user = &request.messages[1].content;
            let a_start = user.find("## EXPLANATION A").unwrap();
            let b_start = user.find("## EXPLANATION B").unwrap();
            let winner = if user[a_start..b_start].contains(self.marker) {
                "A"
            } else {
                "B"
            };
            Ok(Completion {
                content: format!("WINNER: {winner}"),
                finish_reason: FinishReason::Stop,
                backend_id: self.id(),
                latency_ms: 0,
            })
        }
        fn id(&self) -> String {
            "content-judge".into()
        }
    }

    #[test]
    fn position_biased_judge_ties_at_exactly_half() {
        let judge = PositionBiasedJudge;
        let mut record = RunRecord::start("eval", None);
        let outcome = win_rate(&units(4), &judge, &GenerationParams::text(), &mut record).unwrap();
        assert_eq!(outcome.report.mean, 0.5);
        assert!(outcome
            .report
            .per_unit
            .iter()
            .all(|u| u.value == 0.5));
        assert!(outcome.flagged_units.is_empty());
    }

    #[test]
    fn content_judge_gives_unanimous_win() {
        let judge = ContentJudge { marker: "CAND-A" };
        let mut record = RunRecord::start("eval", None);
        let outcome = win_rate(&units(3), &judge, &GenerationParams::text(), &mut record).unwrap();
        assert_eq!(outcome.report.mean, 1.0);
    }

    #[test]
    fn win_rate_is_complementary_under_any_deterministic_judge() {
        for marker in ["CAND-A", "CAND-B"] {
            let judge = ContentJudge { marker };
            let mut record = RunRecord::start("eval", None);
            let forward =
                win_rate(&units(4), &judge, &GenerationParams::text(), &mut record).unwrap();
            let swapped_units: Vec<ComparisonUnit> = units(4)
                .into_iter()
                .map(|mut u| {
                    std::mem::swap(&mut u.candidate_a, &mut u.candidate_b);
                    u
                })
                .collect();
            let backward =
                win_rate(&swapped_units, &judge, &GenerationParams::text(), &mut record).unwrap();
            assert_eq!(forward.report.mean + backward.report.mean, 1.0);
        }
    }

    /// Judge that never produces a parseable verdict.
    struct MuteJudge;

    impl ChatBackend for MuteJudge {
        fn complete(&self, _request: &ChatRequest) -> Result<Completion, GatewayError> {
            Ok(Completion {
                content: "hmm, hard to say".into(),
                finish_reason: FinishReason::Stop,
                backend_id: self.id(),
                latency_ms: 0,
            })
        }
        fn id(&self) -> String {
            "mute".into()
        }
    }

    #[test]
    fn unparseable_verdicts_flag_the_unit_at_half() {
        let judge = MuteJudge;
        let mut record = RunRecord::start("eval", None);
        let outcome = win_rate(&units(2), &judge, &GenerationParams::text(), &mut record).unwrap();
        assert_eq!(outcome.report.mean, 0.5);
        assert_eq!(outcome.flagged_units, vec!["u0".to_string(), "u1".to_string()]);
        // Each ask retried once: 2 units x 2 orderings x 2 prompts.
        assert_eq!(record.prompt_texts_of_kind("judge_compare").len(), 8);
    }
}
