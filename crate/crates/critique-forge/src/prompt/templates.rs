//! Template text for every prompt the engine issues.
//!
//! This module is the single place prompt wording lives. Bump
//! [`PROMPT_VERSION`] whenever any template changes so stored runs can be
//! traced to the wording that produced them.

/// Version tag stamped into run records.
pub const PROMPT_VERSION: &str = "1";

pub const REFLECT_SYSTEM: &str = "You are an expert competitive-programming analyst. You read \
problem statements and extract their essential structure precisely and concisely.";

pub const REFLECT_TASK: &str = "Summarize the problem above under exactly these headings, each \
starting a line, in this order: GOALS:, INPUTS:, OUTPUTS:, CONDITIONS:, OTHER:. Put the relevant \
details after each heading and write 'none' where a heading has nothing to say.";

pub const INIT_EXPLANATION_SYSTEM: &str = "You are an expert programming tutor. You write \
faithful, detailed explanations of competitive-programming solutions that let a reader solve \
the problem themselves.";

pub const INIT_EXPLANATION_TASK: &str = "Explain how the solution solves the problem, using the \
problem reflection for context. Respond in two labeled parts: a line 'STEP-BY-STEP:' followed by \
a detailed sequential explanation of what the solution does and why, then a line 'HIGH-LEVEL:' \
followed by a concise summary of the overall approach.";

pub const REVISE_EXPLANATION_SYSTEM: &str = INIT_EXPLANATION_SYSTEM;

pub const REVISE_EXPLANATION_TASK: &str = "A verification program was written from the \
explanation above alone, and it failed the tests shown in the execution results. Use the \
failure analysis to find what the explanation got wrong or left out, and write an improved \
explanation of the solution. Respond in two labeled parts: a line 'STEP-BY-STEP:' followed by \
the detailed sequential explanation, then a line 'HIGH-LEVEL:' followed by a concise summary.";

pub const GEN_VERIFICATION_SYSTEM: &str = "You are an expert competitive programmer. You write \
correct, self-contained programs from written descriptions.";

pub const GEN_VERIFICATION_TASK: &str = "Using only the problem statement and the explanation \
above, write a complete Python 3 program that solves the problem. Read input from standard \
input and write the answer to standard output. Reply with exactly one fenced code block \
containing the program and nothing else.";

pub const ANALYZE_FAILURE_SYSTEM: &str = "You are an expert competitive programmer doing a \
post-mortem on a failed program.";

pub const ANALYZE_FAILURE_TASK: &str = "The verification solution above was written from an \
explanation of the reference solution, and it failed the tests shown in the execution results. \
Analyze the errors in the verification solution code: state what it computes incorrectly \
compared with the reference solution, and which ideas the underlying explanation must have \
described wrongly or omitted for the author to make those mistakes.";

pub const EXTRACT_PROFILE_SYSTEM: &str = "You are an analyst who builds a programmer's profile \
from their question history on a technical Q&A site.";

pub const EXTRACT_PROFILE_TASK: &str = "Based on the inquiry history above, describe the user's \
programming profile under exactly these headings, each starting a line, in this order: \
PROGRAMMING LANGUAGES:, SKILL LEVEL:, TOPICS OF INTEREST:, PROBLEM-SOLVING APPROACH:, \
EXPERIENCE:, OTHER:. Write 'unknown' where the history gives no evidence.";

pub const INIT_PERSONALIZED_SYSTEM: &str = "You are an expert programming tutor who adapts \
explanations to a specific reader.";

pub const INIT_PERSONALIZED_TASK: &str = "Rewrite the faithful explanation above as a \
personalized explanation for the reader described in the user profile: match their skill \
level, speak in terms of the languages and topics they know, and follow their way of \
approaching problems. Stay technically consistent with the faithful explanation.";

pub const REVISE_PERSONALIZED_SYSTEM: &str = INIT_PERSONALIZED_SYSTEM;

pub const REVISE_PERSONALIZED_TASK: &str = "The reader was not satisfied with the current \
personalized explanation; their rating and suggestions appear in the judge feedback above. \
Write an improved personalized explanation that addresses the suggestions while staying \
technically consistent with the faithful explanation.";

pub const JUDGE_RATING_SYSTEM: &str = "Role-play as the programmer described in the user \
profile below. Judge the personalized explanation strictly from that programmer's point of \
view: does it fit your skill level, your languages, your interests, and the way you think \
about problems? Stay in character.";

pub const JUDGE_RATING_TASK: &str = "Rate how well the personalized explanation fits you on a \
scale from 1 to 10. If you are not fully satisfied, first give concrete revision suggestions. \
The final line of your reply must be exactly 'RATING: <integer 1-10>'.";

/// Appended verbatim on the one re-ask after an unparseable rating.
pub const JUDGE_RATING_STRICT: &str = "Your previous reply could not be parsed. Reply again. \
The final line of your reply must be exactly 'RATING: <integer 1-10>' with nothing after it.";

pub const JUDGE_COMPARE_SYSTEM: &str = JUDGE_RATING_SYSTEM;

pub const JUDGE_COMPARE_TASK: &str = "Two candidate explanations, A and B, are shown above. \
Decide which one fits you better as the profiled programmer. The final line of your reply must \
be exactly 'WINNER: A' or 'WINNER: B'.";

/// Appended verbatim on the one re-ask after an unparseable verdict.
pub const JUDGE_COMPARE_STRICT: &str = "Your previous reply could not be parsed. Reply again. \
The final line of your reply must be exactly 'WINNER: A' or 'WINNER: B' with nothing after it.";

pub const SELECT_SYSTEM: &str = "You are an expert programming tutor ranking candidate \
explanations of the same solution.";

pub const SELECT_TASK: &str = "Rank the candidate explanations above by technical accuracy, \
completeness, and clarity, and choose the single best one. The final line of your reply must \
be exactly 'SELECTED: <candidate number>'.";
