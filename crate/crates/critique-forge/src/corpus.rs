//! Corpus ingestion: problem files in a CodeContests-shaped JSON Lines
//! schema and user inquiry histories, with the standard filters applied at
//! load time (image-description drop, execution-language requirement,
//! shortest-oracle-solution selection, five-most-recent inquiries).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Problem, Solution, TestCase, TestKind, UserInquiry};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Validation,
    Test,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub problems: Vec<Problem>,
    pub split: Split,
}

/// Ingestion knobs; defaults follow the standard corpus conventions.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// A problem whose description contains any of these markers is
    /// dropped.
    pub image_markers: Vec<String>,
    /// Solutions must carry this language tag to qualify as oracles.
    pub language_tag: String,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            image_markers: vec!["<image>".into()],
            language_tag: "python3".into(),
        }
    }
}

/// Filter accounting for one ingestion run. Conservation holds by
/// construction: kept + dropped (by reason) = input lines.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub input_lines: usize,
    pub kept: usize,
    pub dropped_image: usize,
    pub dropped_no_solution: usize,
    pub dropped_no_tests: usize,
}

impl IngestReport {
    pub fn conserves(&self) -> bool {
        self.kept + self.dropped_image + self.dropped_no_solution + self.dropped_no_tests
            == self.input_lines
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTest {
    input: String,
    output: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSolution {
    language: String,
    source: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawProblem {
    id: String,
    #[serde(default)]
    title: String,
    description: String,
    #[serde(default)]
    public_tests: Vec<RawTest>,
    #[serde(default)]
    private_tests: Vec<RawTest>,
    #[serde(default)]
    generated_tests: Vec<RawTest>,
    #[serde(default)]
    solutions: Vec<RawSolution>,
}

fn tests_of_kind(raw: Vec<RawTest>, kind: TestKind) -> Vec<TestCase> {
    raw.into_iter()
        .map(|t| TestCase {
            input: t.input,
            expected_output: t.output,
            kind,
        })
        .collect()
}

/// Loads a problem corpus, applying the ingestion filters:
/// image-marker descriptions dropped, problems without a solution in the
/// configured language dropped, the single shortest qualifying solution
/// retained (ties broken by lexicographically smallest source), and
/// problems lacking public or scoring tests dropped. Malformed lines and
/// duplicate ids are hard errors.
pub fn load_problems(
    path: &Path,
    split: Split,
    options: &IngestOptions,
) -> Result<(Corpus, IngestReport), CorpusError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut report = IngestReport::default();
    let mut problems = Vec::new();
    let mut seen_ids: Vec<String> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.input_lines += 1;
        let lineno = idx + 1;
        let malformed = |message: String| CorpusError::Malformed {
            path: path.display().to_string(),
            line: lineno,
            message,
        };

        let raw: RawProblem =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if seen_ids.contains(&raw.id) {
            return Err(malformed(format!("duplicate problem id '{}'", raw.id)));
        }
        seen_ids.push(raw.id.clone());

        if options
            .image_markers
            .iter()
            .any(|marker| raw.description.contains(marker))
        {
            report.dropped_image += 1;
            continue;
        }

        let oracle = raw
            .solutions
            .iter()
            .filter(|s| s.language == options.language_tag)
            .min_by(|a, b| {
                let len_a = a.source.chars().count();
                let len_b = b.source.chars().count();
                len_a.cmp(&len_b).then_with(|| a.source.cmp(&b.source))
            });
        let Some(oracle) = oracle else {
            report.dropped_no_solution += 1;
            continue;
        };
        let oracle = Solution {
            language_tag: oracle.language.clone(),
            source: oracle.source.clone(),
        };

        let public_tests = tests_of_kind(raw.public_tests, TestKind::Public);
        let mut scoring_tests = tests_of_kind(raw.private_tests, TestKind::Private);
        scoring_tests.extend(tests_of_kind(raw.generated_tests, TestKind::Generated));
        if public_tests.is_empty() || scoring_tests.is_empty() {
            report.dropped_no_tests += 1;
            continue;
        }

        report.kept += 1;
        problems.push(Problem {
            id: raw.id,
            title: raw.title,
            description: raw.description,
            public_tests,
            scoring_tests,
            solutions: vec![oracle],
        });
    }

    Ok((Corpus { problems, split }, report))
}

impl Corpus {
    pub fn find(&self, problem_id: &str) -> Option<&Problem> {
        self.problems.iter().find(|p| p.id == problem_id)
    }

    /// Re-serializes to the wire schema; loading the result yields an
    /// identical corpus.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.problems {
            let raw = RawProblem {
                id: p.id.clone(),
                title: p.title.clone(),
                description: p.description.clone(),
                public_tests: p
                    .public_tests
                    .iter()
                    .map(|t| RawTest {
                        input: t.input.clone(),
                        output: t.expected_output.clone(),
                    })
                    .collect(),
                private_tests: p
                    .scoring_tests
                    .iter()
                    .filter(|t| t.kind == TestKind::Private)
                    .map(|t| RawTest {
                        input: t.input.clone(),
                        output: t.expected_output.clone(),
                    })
                    .collect(),
                generated_tests: p
                    .scoring_tests
                    .iter()
                    .filter(|t| t.kind == TestKind::Generated)
                    .map(|t| RawTest {
                        input: t.input.clone(),
                        output: t.expected_output.clone(),
                    })
                    .collect(),
                solutions: p
                    .solutions
                    .iter()
                    .map(|s| RawSolution {
                        language: s.language_tag.clone(),
                        source: s.source.clone(),
                    })
                    .collect(),
            };
            out.push_str(&serde_json::to_string(&raw).expect("problem serializes"));
            out.push('\n');
        }
        out
    }
}

/// A user's recent inquiry history: at most five inquiries, most recent
/// first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserHistory {
    pub user_id: String,
    pub inquiries: Vec<UserInquiry>,
}

#[derive(Debug, Deserialize)]
struct RawInquiry {
    user_id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    body: String,
    posted_at: String,
}

pub const MAX_INQUIRIES_PER_USER: usize = 5;

/// Loads inquiry histories: groups by user, sorts by post time descending
/// (ties keep input order), and truncates to the five most recent.
/// Inquiries without a user id are skipped with a warning count; missing or
/// unparseable timestamps are hard errors. Users come back sorted by id.
pub fn load_histories(path: &Path) -> Result<(Vec<UserHistory>, usize), CorpusError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut by_user: BTreeMap<String, Vec<UserInquiry>> = BTreeMap::new();
    let mut skipped = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let malformed = |message: String| CorpusError::Malformed {
            path: path.display().to_string(),
            line: lineno,
            message,
        };

        let raw: RawInquiry =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if raw.user_id.trim().is_empty() {
            log::warn!("{}:{lineno}: inquiry without user_id skipped", path.display());
            skipped += 1;
            continue;
        }
        let posted_at = chrono::DateTime::parse_from_rfc3339(&raw.posted_at)
            .map_err(|e| malformed(format!("posted_at: {e}")))?
            .with_timezone(&chrono::Utc);
        by_user.entry(raw.user_id).or_default().push(UserInquiry {
            title: raw.title,
            tags: raw.tags,
            body: raw.body,
            posted_at,
        });
    }

    let histories = by_user
        .into_iter()
        .map(|(user_id, mut inquiries)| {
            inquiries.sort_by_key(|inquiry| std::cmp::Reverse(inquiry.posted_at));
            inquiries.truncate(MAX_INQUIRIES_PER_USER);
            UserHistory { user_id, inquiries }
        })
        .collect();
    Ok((histories, skipped))
}
