//! Text composition operator used everywhere a prompt or final output is
//! assembled from labeled parts.
//!
//! A segment renders as a markdown-style header line `## LABEL` followed by
//! its body; segments join with one blank line. The scheme is deterministic,
//! human-readable in logs, and parseable back into `(label, body)` pairs for
//! any body that does not itself contain the header sentinel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::{Explanation, PersonalizedExplanation};

/// Labeled block of text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub label: String,
    pub body: String,
}

impl Segment {
    pub fn new(label: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            body: body.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("duplicate segment label: {0}")]
    DuplicateLabel(String),
    #[error("segment label must be non-empty and single-line")]
    InvalidLabel,
    #[error("text does not start with a segment header")]
    MissingHeader,
}

const HEADER_PREFIX: &str = "## ";
const JOIN: &str = "\n\n";

/// Renders labeled segments into one text block.
///
/// Deterministic; an empty segment list yields the empty string. Labels must
/// be non-empty, single-line, and unique within the list.
pub fn compose(segments: &[Segment]) -> Result<String, ComposeError> {
    let mut seen: Vec<&str> = Vec::with_capacity(segments.len());
    for seg in segments {
        if seg.label.is_empty() || seg.label.contains('\n') {
            return Err(ComposeError::InvalidLabel);
        }
        if seen.contains(&seg.label.as_str()) {
            return Err(ComposeError::DuplicateLabel(seg.label.clone()));
        }
        seen.push(&seg.label);
    }
    Ok(segments
        .iter()
        .map(|seg| format!("{HEADER_PREFIX}{}\n{}", seg.label, seg.body))
        .collect::<Vec<_>>()
        .join(JOIN))
}

/// Inverse of [`compose`] for bodies free of the header sentinel
/// (a `## ` header line preceded by a blank line).
pub fn parse_composed(text: &str) -> Result<Vec<Segment>, ComposeError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let Some(first) = text.strip_prefix(HEADER_PREFIX) else {
        return Err(ComposeError::MissingHeader);
    };
    let sentinel = format!("{JOIN}{HEADER_PREFIX}");
    first
        .split(&sentinel)
        .map(|part| match part.split_once('\n') {
            Some((label, body)) => Segment::new(label, body),
            None => Segment::new(part, ""),
        })
        .map(|seg| {
            if seg.label.is_empty() {
                Err(ComposeError::InvalidLabel)
            } else {
                Ok(seg)
            }
        })
        .collect()
}

/// Section labels used when an explanation is rendered to text.
pub const STEP_BY_STEP_LABEL: &str = "STEP-BY-STEP";
pub const HIGH_LEVEL_LABEL: &str = "HIGH-LEVEL";
pub const PERSONALIZED_LABEL: &str = "PERSONALIZED";

impl Explanation {
    /// Renders the two explanation sections under their fixed labels.
    pub fn to_text(&self) -> String {
        compose(&[
            Segment::new(STEP_BY_STEP_LABEL, &self.step_by_step),
            Segment::new(HIGH_LEVEL_LABEL, &self.high_level),
        ])
        .expect("fixed distinct labels")
    }
}

/// The engine's final product: the faithful explanation, the optional
/// personalized explanation, and their composed text with faithful content
/// always first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalOutput {
    pub faithful: Explanation,
    pub personalized: Option<PersonalizedExplanation>,
    pub combined_text: String,
}

/// Combines the faithful explanation with the personalized one (when
/// present), faithful-first.
pub fn assemble_final(
    faithful: Explanation,
    personalized: Option<PersonalizedExplanation>,
) -> FinalOutput {
    let mut segments = vec![
        Segment::new(STEP_BY_STEP_LABEL, &faithful.step_by_step),
        Segment::new(HIGH_LEVEL_LABEL, &faithful.high_level),
    ];
    if let Some(pe) = &personalized {
        segments.push(Segment::new(PERSONALIZED_LABEL, &pe.body));
    }
    let combined_text = compose(&segments).expect("fixed distinct labels");
    FinalOutput {
        faithful,
        personalized,
        combined_text,
    }
}
