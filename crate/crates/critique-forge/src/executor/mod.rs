//! Runs candidate programs against test cases in isolated subprocesses with
//! wall-clock limits and output caps.
//!
//! Isolation here means a fresh subprocess and a private temp working
//! directory per test; there is no OS-level confinement (namespaces,
//! syscall filters), which is a deployment concern for untrusted corpora.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::model::{ExecutionReport, TestCase, TestResult, Verdict};
use crate::util::Semaphore;

/// Placeholder in interpreter argv templates replaced by the path of the
/// candidate source file.
pub const SOURCE_PLACEHOLDER: &str = "{source}";

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("no interpreter configured for language tag '{0}'")]
    UnknownLanguage(String),
    #[error("failed to start sandbox process: {0}")]
    SandboxSpawnFailure(String),
    #[error("run_tests requires at least one test case")]
    NoTests,
    #[error("sandbox I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-run resource limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecLimits {
    pub per_test_timeout_ms: u64,
    pub max_output_bytes: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self {
            per_test_timeout_ms: 10_000,
            max_output_bytes: 1024 * 1024,
        }
    }
}

/// Subprocess test runner. Safe to share across threads; an internal pool
/// caps concurrent subprocesses at the logical CPU count by default.
pub struct SandboxExecutor {
    interpreters: HashMap<String, Vec<String>>,
    pool: Semaphore,
}

impl Default for SandboxExecutor {
    fn default() -> Self {
        Self::new()
    }
}

/// Built-in `language_tag -> argv template` mapping (python only; compiled
/// toolchains are out of scope).
pub fn default_interpreters() -> HashMap<String, Vec<String>> {
    let mut interpreters = HashMap::new();
    for tag in ["python3", "python"] {
        interpreters.insert(
            tag.to_string(),
            vec!["python3".to_string(), SOURCE_PLACEHOLDER.to_string()],
        );
    }
    interpreters
}

impl SandboxExecutor {
    pub fn new() -> Self {
        Self::with_interpreters(default_interpreters())
    }

    /// Custom `language_tag -> argv template` table. Templates must contain
    /// [`SOURCE_PLACEHOLDER`] where the source file path goes.
    pub fn with_interpreters(interpreters: HashMap<String, Vec<String>>) -> Self {
        let cpus = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(4);
        Self {
            interpreters,
            pool: Semaphore::new(cpus),
        }
    }

    pub fn supports(&self, language_tag: &str) -> bool {
        self.interpreters.contains_key(language_tag)
    }

    /// Runs `source` against every test, in order, one fresh subprocess per
    /// test; never short-circuits, since downstream failure analysis wants
    /// the full verdict pattern. Verdicts compare outputs after
    /// [`normalize`].
    pub fn run_tests(
        &self,
        source: &str,
        language_tag: &str,
        tests: &[TestCase],
        limits: ExecLimits,
    ) -> Result<ExecutionReport, ExecError> {
        let template = self
            .interpreters
            .get(language_tag)
            .ok_or_else(|| ExecError::UnknownLanguage(language_tag.to_string()))?;
        if tests.is_empty() {
            return Err(ExecError::NoTests);
        }

        let mut results = Vec::with_capacity(tests.len());
        for test in tests {
            let _slot = self.pool.acquire();
            results.push(self.run_one(source, template, test, limits)?);
        }
        Ok(ExecutionReport::new(results))
    }

    fn run_one(
        &self,
        source: &str,
        template: &[String],
        test: &TestCase,
        limits: ExecLimits,
    ) -> Result<TestResult, ExecError> {
        let workdir = tempfile::tempdir()?;
        let source_path = workdir.path().join("prog");
        std::fs::write(&source_path, source)?;
        let source_str = source_path.to_string_lossy().into_owned();

        let argv: Vec<String> = template
            .iter()
            .map(|part| part.replace(SOURCE_PLACEHOLDER, &source_str))
            .collect();

        let started = Instant::now();
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .current_dir(workdir.path())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ExecError::SandboxSpawnFailure(format!("{}: {e}", argv[0])))?;

        let mut stdin = child.stdin.take().expect("stdin piped");
        let input = test.input.clone();
        let writer = std::thread::spawn(move || {
            // Broken pipes are expected when the program exits early.
            let _ = stdin.write_all(input.as_bytes());
        });

        let stdout_pipe = child.stdout.take().expect("stdout piped");
        let stderr_pipe = child.stderr.take().expect("stderr piped");
        let cap = limits.max_output_bytes;
        let out_reader = std::thread::spawn(move || read_capped(stdout_pipe, cap));
        let err_reader = std::thread::spawn(move || read_capped(stderr_pipe, cap));

        let timeout = Duration::from_millis(limits.per_test_timeout_ms);
        let timed_out = wait_with_deadline(&mut child, started, timeout)?;
        let wall_time_ms = started.elapsed().as_millis() as u64;

        let _ = writer.join();
        let (stdout_bytes, truncated) = out_reader.join().unwrap_or_default();
        let (stderr_bytes, _) = err_reader.join().unwrap_or_default();
        let actual_output = String::from_utf8_lossy(&stdout_bytes).into_owned();
        let stderr = String::from_utf8_lossy(&stderr_bytes).into_owned();

        let verdict = if timed_out {
            Verdict::Timeout
        } else if !child.wait()?.success() {
            Verdict::RuntimeError
        } else if truncated {
            Verdict::WrongAnswer
        } else if normalize(&actual_output) == normalize(&test.expected_output) {
            Verdict::Accepted
        } else {
            Verdict::WrongAnswer
        };

        Ok(TestResult {
            verdict,
            actual_output,
            stderr,
            wall_time_ms,
        })
    }
}

/// Polls the child until exit or deadline; kills on deadline. Returns
/// whether the process was killed for exceeding the budget. The child is
/// fully reaped in either case.
fn wait_with_deadline(
    child: &mut Child,
    started: Instant,
    timeout: Duration,
) -> Result<bool, ExecError> {
    loop {
        if child.try_wait()?.is_some() {
            return Ok(false);
        }
        if started.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(true);
        }
        std::thread::sleep(Duration::from_millis(2));
    }
}

fn read_capped(mut pipe: impl Read, cap: usize) -> (Vec<u8>, bool) {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 8192];
    let mut truncated = false;
    loop {
        match pipe.read(&mut chunk) {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                if !truncated {
                    let room = cap.saturating_sub(buf.len());
                    let take = n.min(room);
                    buf.extend_from_slice(&chunk[..take]);
                    if take < n {
                        truncated = true;
                    }
                }
                // Past the cap: keep draining so the child never blocks on
                // a full pipe, but discard the bytes.
            }
        }
    }
    (buf, truncated)
}

/// Output comparison rule: CRLF to LF, trailing whitespace stripped from
/// each line, trailing empty lines removed.
pub fn normalize(raw: &str) -> String {
    let unified = raw.replace("\r\n", "\n");
    let mut lines: Vec<&str> = unified.split('\n').map(str::trim_end).collect();
    while lines.last() == Some(&"") {
        lines.pop();
    }
    lines.join("\n")
}
