//! Parsers for structured model completions: labeled sections, fenced code
//! blocks, and trailing verdict lines. All parsers degrade rather than fail:
//! a completion that does not match the expected shape yields empty fields
//! while the raw text is kept by the caller.

use std::collections::HashMap;

use crate::model::{ProblemReflection, UserProfile};

/// Splits `text` into a preamble (before any heading) and a map from heading
/// to section body. A heading matches at the start of a line, case-insensitive,
/// after common markdown decorations (`#`, `*`, `-`, `>`); its section runs
/// until the next heading.
pub fn split_sections<'h>(
    text: &str,
    headings: &[&'h str],
) -> (String, HashMap<&'h str, String>) {
    let mut sections: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut preamble: Vec<&str> = Vec::new();
    let mut current: Option<&str> = None;

    for line in text.lines() {
        let stripped = line.trim_start_matches(['#', '*', '-', '>', ' ', '\t']);
        let upper = stripped.to_uppercase();
        if let Some(&heading) = headings.iter().find(|h| upper.starts_with(&h.to_uppercase()))
        {
            let rest = stripped[heading.len()..].trim_start_matches(['*', ' ', '\t']);
            let body = sections.entry(heading).or_default();
            if !rest.is_empty() {
                body.push(rest);
            }
            current = Some(heading);
        } else {
            match current {
                Some(heading) => sections.get_mut(heading).unwrap().push(line),
                None => preamble.push(line),
            }
        }
    }

    let finish = |lines: Vec<&str>| lines.join("\n").trim().to_string();
    (
        finish(preamble),
        sections
            .into_iter()
            .map(|(heading, lines)| (heading, finish(lines)))
            .collect(),
    )
}

const REFLECTION_HEADINGS: [&str; 5] = ["GOALS:", "INPUTS:", "OUTPUTS:", "CONDITIONS:", "OTHER:"];

/// Structured view of a reflection completion; unmatched sections stay empty
/// and the verbatim completion is always retained in `raw`.
pub fn parse_reflection(raw: &str) -> ProblemReflection {
    let (_, mut sections) = split_sections(raw, &REFLECTION_HEADINGS);
    let mut take = |heading: &str| sections.remove(heading).unwrap_or_default();
    ProblemReflection {
        goals: take("GOALS:"),
        inputs: take("INPUTS:"),
        outputs: take("OUTPUTS:"),
        conditions: take("CONDITIONS:"),
        other: take("OTHER:"),
        raw: raw.to_string(),
    }
}

const PROFILE_HEADINGS: [&str; 6] = [
    "PROGRAMMING LANGUAGES:",
    "SKILL LEVEL:",
    "TOPICS OF INTEREST:",
    "PROBLEM-SOLVING APPROACH:",
    "EXPERIENCE:",
    "OTHER:",
];

/// Six-aspect profile from an extraction completion, with the same
/// degradation behavior as [`parse_reflection`].
pub fn parse_profile(raw: &str) -> UserProfile {
    let (_, mut sections) = split_sections(raw, &PROFILE_HEADINGS);
    let mut take = |heading: &str| sections.remove(heading).unwrap_or_default();
    UserProfile {
        programming_languages: take("PROGRAMMING LANGUAGES:"),
        skill_level: take("SKILL LEVEL:"),
        topics_of_interest: take("TOPICS OF INTEREST:"),
        problem_solving_approach: take("PROBLEM-SOLVING APPROACH:"),
        experience: take("EXPERIENCE:"),
        other: take("OTHER:"),
        raw: raw.to_string(),
    }
}

const STEP_HEADING: &str = "STEP-BY-STEP:";
const HIGH_HEADING: &str = "HIGH-LEVEL:";

/// Splits an explanation completion into its two labeled parts. When no
/// label is present the whole completion becomes the step-by-step part.
pub fn parse_explanation_parts(raw: &str) -> (String, String) {
    let (preamble, mut sections) = split_sections(raw, &[STEP_HEADING, HIGH_HEADING]);
    let step = sections.remove(STEP_HEADING);
    let high = sections.remove(HIGH_HEADING);
    match (step, high) {
        (Some(step), Some(high)) => (step, high),
        (Some(step), None) => (step, String::new()),
        (None, Some(high)) => (preamble, high),
        (None, None) => (raw.trim().to_string(), String::new()),
    }
}

/// Finds the last line of the form `TAG value` (after markdown decoration
/// stripping, case-insensitive) and returns the value together with the text
/// with that line removed. `tag` must include its trailing colon.
pub fn take_trailing_tag(text: &str, tag: &str) -> Option<(String, String)> {
    let lines: Vec<&str> = text.lines().collect();
    let upper_tag = tag.to_uppercase();
    for (idx, line) in lines.iter().enumerate().rev() {
        let stripped = line.trim_start_matches(['#', '*', '-', '>', ' ', '\t']);
        if stripped.to_uppercase().starts_with(&upper_tag) {
            let value = stripped[tag.len()..]
                .trim()
                .trim_matches(['*', '.', ' '])
                .to_string();
            let rest: Vec<&str> = lines[..idx]
                .iter()
                .chain(lines[idx + 1..].iter())
                .copied()
                .collect();
            return Some((value, rest.join("\n").trim().to_string()));
        }
    }
    None
}

/// Rating line parser: `RATING: <integer 1-10>`. Out-of-range or
/// non-integer values count as unparseable.
pub fn parse_rating(text: &str) -> Option<(u8, String)> {
    let (value, rest) = take_trailing_tag(text, "RATING:")?;
    let score: u8 = value.split_whitespace().next()?.parse().ok()?;
    (1..=10).contains(&score).then_some((score, rest))
}

/// Pairwise verdict by presented position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonWinner {
    PositionA,
    PositionB,
}

/// Verdict line parser: `WINNER: A` or `WINNER: B`.
pub fn parse_winner(text: &str) -> Option<ComparisonWinner> {
    let (value, _) = take_trailing_tag(text, "WINNER:")?;
    match value.split_whitespace().next()?.to_uppercase().as_str() {
        "A" => Some(ComparisonWinner::PositionA),
        "B" => Some(ComparisonWinner::PositionB),
        _ => None,
    }
}

/// Selection line parser: `SELECTED: <1-based candidate number>`.
pub fn parse_selection(text: &str) -> Option<usize> {
    let (value, _) = take_trailing_tag(text, "SELECTED:")?;
    value.split_whitespace().next()?.parse().ok()
}

/// First fenced code block (``` fences, optional language tag); `None` when
/// the text has no complete fence.
pub fn extract_fenced_code(text: &str) -> Option<String> {
    let open = text.find("```")?;
    let after_fence = &text[open + 3..];
    let body_start = after_fence.find('\n')? + 1;
    let body = &after_fence[body_start..];
    let close = body.find("```")?;
    Some(body[..close].trim_end().to_string())
}
