//! The personalization loop: extract a six-aspect profile from a user's
//! inquiry history, draft a personalized explanation on top of the faithful
//! one, and refine it under a role-playing judge until the judge is
//! satisfied or the draft budget is spent.
//!
//! The loop never touches the faithful explanation it conditions on; the
//! two loops optimize their objectives independently.

use crate::error::PipelineError;
use crate::gateway::{ChatBackend, ChatRequest, Completion};
use crate::model::{
    Explanation, GenerationParams, JudgeRating, LoopConfig, PersonalizedExplanation, Problem,
    Solution, UserInquiry, UserProfile,
};
use crate::parse;
use crate::prompt::{self, templates, ContextField, PromptContext, PromptKind};
use crate::record::RunRecord;

/// Result of one full loop run.
#[derive(Debug, Clone)]
pub struct PersonalizationOutcome {
    /// Last draft; carries the rating it received.
    pub final_personalized: PersonalizedExplanation,
    /// One rating per draft, iteration-ordered.
    pub ratings: Vec<JudgeRating>,
    pub profile: UserProfile,
}

pub struct PersonalizationLoop<'a> {
    /// Generates profiles, drafts, and revisions.
    pub backend: &'a dyn ChatBackend,
    /// Role-plays the profiled user; defaults to the generator backend but
    /// may point at a different model.
    pub judge_backend: &'a dyn ChatBackend,
    pub config: &'a LoopConfig,
    pub text_params: GenerationParams,
}

impl<'a> PersonalizationLoop<'a> {
    pub fn new(backend: &'a dyn ChatBackend, config: &'a LoopConfig) -> Self {
        Self {
            backend,
            judge_backend: backend,
            config,
            text_params: GenerationParams::text(),
        }
    }

    pub fn with_judge(mut self, judge_backend: &'a dyn ChatBackend) -> Self {
        self.judge_backend = judge_backend;
        self
    }

    fn complete_kind(
        &self,
        backend: &dyn ChatBackend,
        kind: PromptKind,
        ctx: &PromptContext,
        record: &mut RunRecord,
    ) -> Result<Completion, PipelineError> {
        let messages = prompt::render(kind, ctx)?;
        record.log_prompt(kind.name(), &messages);
        let completion =
            backend.complete(&ChatRequest::new(messages, self.text_params.clone()))?;
        record.log_completion(kind.name(), &completion);
        Ok(completion)
    }

    /// Infers the user's programming profile from their inquiry history and
    /// nothing else; the prompt carries no problem or solution text.
    pub fn extract_profile(
        &self,
        history: &[UserInquiry],
        record: &mut RunRecord,
    ) -> Result<UserProfile, PipelineError> {
        if history.is_empty() {
            return Err(PipelineError::Contract(
                "extract_profile requires a non-empty inquiry history".into(),
            ));
        }
        let ctx =
            PromptContext::new().with(ContextField::History, render_history(history));
        let completion =
            self.complete_kind(self.backend, PromptKind::ExtractProfile, &ctx, record)?;
        Ok(parse::parse_profile(&completion.content))
    }

    /// First personalized draft on top of the faithful explanation.
    pub fn init_personalized(
        &self,
        problem: &Problem,
        solution: &Solution,
        profile: &UserProfile,
        faithful: &Explanation,
        record: &mut RunRecord,
    ) -> Result<PersonalizedExplanation, PipelineError> {
        let ctx = PromptContext::new()
            .with(ContextField::Problem, &problem.description)
            .with(ContextField::Solution, &solution.source)
            .with(ContextField::Profile, &profile.raw)
            .with(ContextField::FaithfulExplanation, faithful.to_text());
        let completion =
            self.complete_kind(self.backend, PromptKind::InitPersonalized, &ctx, record)?;
        Ok(PersonalizedExplanation {
            body: completion.content,
            iteration: 0,
            rating: None,
        })
    }

    /// Role-playing judgment of a draft. An unparseable rating triggers one
    /// stricter re-ask; a second failure falls back to score 1 so the loop
    /// keeps refining instead of crashing.
    pub fn judge(
        &self,
        profile: &UserProfile,
        problem: &Problem,
        solution: &Solution,
        personalized: &PersonalizedExplanation,
        record: &mut RunRecord,
    ) -> Result<JudgeRating, PipelineError> {
        let ctx = PromptContext::new()
            .with(ContextField::Profile, &profile.raw)
            .with(ContextField::Problem, &problem.description)
            .with(ContextField::Solution, &solution.source)
            .with(ContextField::Personalized, &personalized.body);
        let kind = PromptKind::JudgeRating;
        let completion = self.complete_kind(self.judge_backend, kind, &ctx, record)?;

        let mut content = completion.content;
        let mut parsed = parse::parse_rating(&content);
        if parsed.is_none() {
            // One re-ask with the strict format reminder appended.
            let mut messages = prompt::render(kind, &ctx)?;
            messages[1].content =
                format!("{}\n\n{}", messages[1].content, templates::JUDGE_RATING_STRICT);
            record.log_prompt(kind.name(), &messages);
            let retry = self
                .judge_backend
                .complete(&ChatRequest::new(messages, self.text_params.clone()))?;
            record.log_completion(kind.name(), &retry);
            content = retry.content;
            parsed = parse::parse_rating(&content);
        }

        let rating = match parsed {
            Some((score, rest)) => {
                let satisfied = score >= self.config.satisfaction_threshold;
                let suggestions = if !satisfied && rest.trim().is_empty() {
                    "(judge gave no usable suggestions)".to_string()
                } else {
                    rest
                };
                JudgeRating {
                    score,
                    satisfied,
                    suggestions,
                    raw: content,
                }
            }
            None => {
                log::warn!("judge rating unparseable twice; defaulting to score 1");
                JudgeRating {
                    score: 1,
                    satisfied: false,
                    suggestions: if content.trim().is_empty() {
                        "(judge gave no usable suggestions)".to_string()
                    } else {
                        content.clone()
                    },
                    raw: content,
                }
            }
        };
        record.log_rating(personalized.iteration, &rating);
        Ok(rating)
    }

    /// Produces the next draft from the judge's score and suggestions.
    pub fn revise_personalized(
        &self,
        problem: &Problem,
        solution: &Solution,
        faithful: &Explanation,
        profile: &UserProfile,
        previous: &PersonalizedExplanation,
        rating: &JudgeRating,
        record: &mut RunRecord,
    ) -> Result<PersonalizedExplanation, PipelineError> {
        if rating.satisfied {
            return Err(PipelineError::Contract(
                "revise_personalized called with a satisfied rating".into(),
            ));
        }
        let feedback = format!(
            "Rating: {}/10\n\nSuggestions:\n{}",
            rating.score, rating.suggestions
        );
        let ctx = PromptContext::new()
            .with(ContextField::Problem, &problem.description)
            .with(ContextField::Solution, &solution.source)
            .with(ContextField::FaithfulExplanation, faithful.to_text())
            .with(ContextField::Profile, &profile.raw)
            .with(ContextField::Personalized, &previous.body)
            .with(ContextField::JudgeFeedback, feedback);
        let completion =
            self.complete_kind(self.backend, PromptKind::RevisePersonalized, &ctx, record)?;
        Ok(PersonalizedExplanation {
            body: completion.content,
            iteration: previous.iteration + 1,
            rating: None,
        })
    }

    /// Full loop: extract the profile once, then draft/judge/(revise+judge)
    /// until satisfied or `max_iterations` drafts exist. Every draft is
    /// judged exactly once.
    pub fn run(
        &self,
        problem: &Problem,
        solution: &Solution,
        faithful: &Explanation,
        history: &[UserInquiry],
        record: &mut RunRecord,
    ) -> Result<PersonalizationOutcome, PipelineError> {
        let profile = self.extract_profile(history, record)?;
        let mut personalized =
            self.init_personalized(problem, solution, &profile, faithful, record)?;
        let mut ratings: Vec<JudgeRating> = Vec::new();

        loop {
            let rating = self.judge(&profile, problem, solution, &personalized, record)?;
            personalized.rating = Some(rating.clone());
            let stop = rating.satisfied
                || personalized.iteration + 1 >= self.config.max_iterations;
            ratings.push(rating);
            if stop {
                break;
            }
            personalized = self.revise_personalized(
                problem,
                solution,
                faithful,
                &profile,
                &personalized,
                ratings.last().expect("just pushed"),
                record,
            )?;
        }

        Ok(PersonalizationOutcome {
            final_personalized: personalized,
            ratings,
            profile,
        })
    }
}

/// Inquiry history rendered for the extraction prompt: title, tags, body,
/// and post time per inquiry, most recent first.
pub fn render_history(history: &[UserInquiry]) -> String {
    history
        .iter()
        .enumerate()
        .map(|(i, inquiry)| {
            format!(
                "Inquiry {} ({}):\nTitle: {}\nTags: {}\n{}",
                i + 1,
                inquiry.posted_at.to_rfc3339(),
                inquiry.title,
                inquiry.tags.join(", "),
                inquiry.body
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;
    use crate::model::{TestCase, TestKind};
    use chrono::TimeZone;

    fn problem() -> Problem {
        Problem {
            id: "p1".into(),
            title: "t".into(),
            description: "Read two integers and print their sum.".into(),
            public_tests: vec![TestCase {
                input: "1 2\n".into(),
                expected_output: "3\n".into(),
                kind: TestKind::Public,
            }],
            scoring_tests: vec![],
            solutions: vec![solution()],
        }
    }

    fn solution() -> Solution {
        Solution {
            language_tag: "python3".into(),
            source: "print(sum(map(int, input().split())))".into(),
        }
    }

    fn faithful() -> Explanation {
        Explanation {
            step_by_step: "split and add".into(),
            high_level: "addition".into(),
            iteration: 0,
            verified: true,
        }
    }

    fn history() -> Vec<UserInquiry> {
        vec![
            UserInquiry {
                title: "How do list comprehensions work?".into(),
                tags: vec!["python".into(), "list".into()],
                body: "I keep mixing up the order of the for clauses.".into(),
                posted_at: chrono::Utc.with_ymd_and_hms(2024, 5, 2, 10, 0, 0).unwrap(),
            },
            UserInquiry {
                title: "Sorting a dict by value".into(),
                tags: vec!["python".into()],
                body: "What is the idiomatic way?".into(),
                posted_at: chrono::Utc.with_ymd_and_hms(2024, 4, 1, 9, 0, 0).unwrap(),
            },
        ]
    }

    const PROFILE: &str = "PROGRAMMING LANGUAGES: Python\nSKILL LEVEL: beginner\nTOPICS OF INTEREST: collections\nPROBLEM-SOLVING APPROACH: examples first\nEXPERIENCE: one year\nOTHER: none";

    fn run_loop(
        responses: Vec<&str>,
        max_iterations: u32,
    ) -> (PersonalizationOutcome, RunRecord, ScriptedBackend) {
        let backend = ScriptedBackend::new(responses);
        let config = LoopConfig {
            max_iterations,
            ..LoopConfig::default()
        };
        let pl = PersonalizationLoop::new(&backend, &config);
        let mut record = RunRecord::start("p1", Some("u1"));
        let outcome = pl
            .run(&problem(), &solution(), &faithful(), &history(), &mut record)
            .unwrap();
        (outcome, record, backend)
    }

    #[test]
    fn satisfied_judge_exits_after_first_draft() {
        let (outcome, _record, backend) =
            run_loop(vec![PROFILE, "for a beginner: add the parts", "fits me well\nRATING: 9"], 4);
        assert_eq!(outcome.ratings.len(), 1);
        assert_eq!(outcome.final_personalized.iteration, 0);
        assert!(outcome.ratings[0].satisfied);
        assert_eq!(outcome.final_personalized.body, "for a beginner: add the parts");
        assert_eq!(backend.remaining(), 0);
        assert_eq!(outcome.profile.skill_level, "beginner");
    }

    #[test]
    fn never_satisfied_judge_exhausts_four_drafts() {
        let responses = vec![
            PROFILE,
            "draft 0",
            "too advanced\nRATING: 4",
            "draft 1",
            "still too advanced\nRATING: 5",
            "draft 2",
            "closer\nRATING: 6",
            "draft 3",
            "not quite\nRATING: 7",
        ];
        let (outcome, _record, backend) = run_loop(responses, 4);
        assert_eq!(outcome.ratings.len(), 4);
        assert_eq!(outcome.final_personalized.iteration, 3);
        assert!(!outcome.ratings.iter().any(|r| r.satisfied));
        assert_eq!(outcome.final_personalized.body, "draft 3");
        assert_eq!(backend.remaining(), 0);
    }

    #[test]
    fn satisfied_at_second_draft_means_two_ratings_one_revision() {
        let responses = vec![
            PROFILE,
            "draft 0",
            "too advanced\nRATING: 4",
            "draft 1",
            "good now\nRATING: 8",
        ];
        let (outcome, _record, _backend) = run_loop(responses, 4);
        assert_eq!(outcome.ratings.len(), 2);
        assert_eq!(outcome.final_personalized.iteration, 1);
        assert!(outcome.ratings[1].satisfied);
    }

    #[test]
    fn dissatisfied_rating_keeps_suggestions() {
        let (_outcome, record, _backend) = run_loop(
            vec![
                PROFILE,
                "draft 0",
                "too advanced, show an example first\nRATING: 4",
                "draft 1",
                "good\nRATING: 9",
            ],
            4,
        );
        let texts = record.prompt_texts_of_kind("revise_personalized");
        assert_eq!(texts.len(), 1);
        assert!(texts[0].contains("Rating: 4/10"));
        assert!(texts[0].contains("too advanced, show an example first"));
    }

    #[test]
    fn unparseable_rating_retries_once_then_defaults() {
        let responses = vec![
            PROFILE,
            "draft 0",
            "no verdict at all",
            "still no verdict",
            "draft 1",
            "good\nRATING: 9",
        ];
        let (outcome, record, backend) = run_loop(responses, 4);
        assert_eq!(outcome.ratings.len(), 2);
        assert_eq!(outcome.ratings[0].score, 1);
        assert!(!outcome.ratings[0].satisfied);
        assert_eq!(outcome.ratings[0].suggestions, "still no verdict");
        assert!(outcome.ratings[1].satisfied);
        assert_eq!(backend.remaining(), 0);
        // Both judge prompts were logged (original + strict re-ask).
        assert_eq!(record.prompt_texts_of_kind("judge_rating").len(), 3);
    }

    #[test]
    fn threshold_boundary_is_inclusive() {
        let responses = vec![PROFILE, "draft 0", "acceptable\nRATING: 8"];
        let (outcome, _record, _backend) = run_loop(responses, 4);
        assert!(outcome.ratings[0].satisfied);
    }

    #[test]
    fn profile_prompt_contains_only_history() {
        let (_outcome, record, _backend) =
            run_loop(vec![PROFILE, "draft", "ok\nRATING: 9"], 4);
        let texts = record.prompt_texts_of_kind("extract_profile");
        assert_eq!(texts.len(), 1);
        assert!(texts[0].contains("How do list comprehensions work?"));
        assert!(texts[0].contains("python, list"));
        assert!(texts[0].contains("mixing up the order"));
        // Profile purity: no task text in the extraction prompt.
        assert!(!texts[0].contains("Read two integers"));
        assert!(!texts[0].contains("print(sum"));
    }

    #[test]
    fn empty_history_is_rejected() {
        let backend = ScriptedBackend::new(Vec::<String>::new());
        let config = LoopConfig::default();
        let pl = PersonalizationLoop::new(&backend, &config);
        let mut record = RunRecord::start("p1", Some("u1"));
        assert!(matches!(
            pl.extract_profile(&[], &mut record),
            Err(PipelineError::Contract(_))
        ));
    }

    #[test]
    fn faithful_explanation_is_never_mutated() {
        let e = faithful();
        let before = e.clone();
        let backend = ScriptedBackend::new(vec![PROFILE, "draft", "ok\nRATING: 9"]);
        let config = LoopConfig::default();
        let pl = PersonalizationLoop::new(&backend, &config);
        let mut record = RunRecord::start("p1", Some("u1"));
        pl.run(&problem(), &solution(), &e, &history(), &mut record)
            .unwrap();
        assert_eq!(e, before);
    }
}
