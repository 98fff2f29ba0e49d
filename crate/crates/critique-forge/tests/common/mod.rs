//! Shared fixtures for the integration and acceptance suites.

use critique_forge::corpus::UserHistory;
use critique_forge::model::{Problem, Solution, TestCase, TestKind, UserInquiry};

pub const REFLECTION: &str =
    "GOALS: sum two ints\nINPUTS: one line, two integers\nOUTPUTS: one integer\nCONDITIONS: none\nOTHER: none";

pub const DRAFT: &str =
    "STEP-BY-STEP:\nsplit the line, convert to ints, add them, print\nHIGH-LEVEL:\nplain addition";

/// A correct verification program written "from the explanation": not the
/// oracle's text.
pub const VS_PASS: &str = "```python\nprint(sum(map(int, input().split())))\n```";

pub const VS_FAIL: &str = "```python\nprint(42)\n```";

pub const PROFILE: &str = "PROGRAMMING LANGUAGES: Python\nSKILL LEVEL: beginner\nTOPICS OF INTEREST: collections\nPROBLEM-SOLVING APPROACH: examples first\nEXPERIENCE: one year\nOTHER: none";

pub fn oracle() -> Solution {
    Solution {
        language_tag: "python3".into(),
        source: "a, b = map(int, input().split())\nprint(a + b)\n".into(),
    }
}

pub fn echo_sum_problem(id: &str) -> Problem {
    Problem {
        id: id.into(),
        title: "Echo Sum".into(),
        description: format!("[{id}] Read two integers from one line and print their sum."),
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
        scoring_tests: vec![
            TestCase {
                input: "1 2\n".into(),
                expected_output: "3\n".into(),
                kind: TestKind::Private,
            },
            TestCase {
                input: "5 5\n".into(),
                expected_output: "10\n".into(),
                kind: TestKind::Generated,
            },
        ],
        solutions: vec![oracle()],
    }
}

pub fn beginner_history(user_id: &str) -> UserHistory {
    use chrono::TimeZone;
    UserHistory {
        user_id: user_id.into(),
        inquiries: vec![
            UserInquiry {
                title: "How do list comprehensions work?".into(),
                tags: vec!["python".into(), "list".into()],
                body: "I keep mixing up the order of the for clauses.".into(),
                posted_at: chrono::Utc.with_ymd_and_hms(2024, 5, 2, 10, 0, 0).unwrap(),
            },
            UserInquiry {
                title: "Sorting a dict by value".into(),
                tags: vec!["python".into(), "sorting".into()],
                body: "What is the idiomatic way to sort a dict by its values?".into(),
                posted_at: chrono::Utc.with_ymd_and_hms(2024, 4, 1, 9, 0, 0).unwrap(),
            },
        ],
    }
}

/// Scripted completions for one full pipeline run (faithfulness passes on
/// the first draft, judge satisfied on the first personalized draft).
pub fn happy_pipeline_script() -> Vec<String> {
    vec![
        REFLECTION.into(),
        DRAFT.into(),
        VS_PASS.into(),
        PROFILE.into(),
        "for a beginner: split the input like a list comprehension source, then add".into(),
        "fits me well\nRATING: 9".into(),
    ]
}

/// Scripted completions for a pipeline run whose faithfulness loop fails
/// once and revises (so revision/analysis prompts with embedded execution
/// output are exercised), then one judge revision round.
pub fn revising_pipeline_script() -> Vec<String> {
    vec![
        REFLECTION.into(),
        DRAFT.into(),
        VS_FAIL.into(),
        "the program printed a constant instead of adding".into(),
        DRAFT.into(),
        VS_PASS.into(),
        PROFILE.into(),
        "draft zero".into(),
        "too dry, give an example\nRATING: 5".into(),
        "draft one with an example".into(),
        "better\nRATING: 9".into(),
    ]
}
