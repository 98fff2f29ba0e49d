//! Record/replay cassettes: JSON Lines files mapping request digests to
//! ordered completion lists, so a recorded run replays with zero network
//! calls and full sample multiplicity.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, Completion, GatewayError};

/// One recorded (request, completion) pair. `seq` is the global append
/// order, which fixes replay order for repeated identical requests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub digest: String,
    pub request: ChatRequest,
    pub completion: Completion,
    pub seq: u64,
}

/// In-memory view of a cassette file.
#[derive(Debug, Default)]
pub struct Cassette {
    /// Digest -> completions in recorded order.
    pub entries: HashMap<String, Vec<Completion>>,
    len: usize,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let file = File::open(path)?;
        let reader = BufReader::new(file);
        let mut raw: Vec<CassetteEntry> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry = serde_json::from_str(&line).map_err(|e| {
                GatewayError::Format(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            raw.push(entry);
        }
        raw.sort_by_key(|e| e.seq);
        let len = raw.len();
        let mut entries: HashMap<String, Vec<Completion>> = HashMap::new();
        for entry in raw {
            entries.entry(entry.digest).or_default().push(entry.completion);
        }
        Ok(Self { entries, len })
    }

    /// Total recorded pairs.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Replays a loaded cassette; never touches the network. Repeated identical
/// requests consume the recorded list in order. Unknown digests and
/// exhausted lists are [`GatewayError::MissingRecording`].
pub struct ReplayBackend {
    queues: HashMap<String, Mutex<VecDeque<Completion>>>,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        Ok(Self::from_cassette(Cassette::load(path)?))
    }

    pub fn from_cassette(cassette: Cassette) -> Self {
        let queues = cassette
            .entries
            .into_iter()
            .map(|(digest, list)| (digest, Mutex::new(VecDeque::from(list))))
            .collect();
        Self { queues }
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let queue = self
            .queues
            .get(&request.request_digest)
            .ok_or_else(|| GatewayError::MissingRecording(request.request_digest.clone()))?;
        queue
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| GatewayError::MissingRecording(request.request_digest.clone()))
    }

    fn id(&self) -> String {
        "replay".into()
    }
}

/// Pass-through backend that appends every (request, completion) pair to a
/// cassette file. Creating the recorder truncates any existing file, so an
/// empty run still leaves a valid zero-entry cassette.
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
    writer: Mutex<(BufWriter<File>, u64)>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn create(inner: B, path: &Path) -> Result<Self, GatewayError> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let file = File::create(path)?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            writer: Mutex::new((BufWriter::new(file), 0)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let completion = self.inner.complete(request)?;
        let mut guard = self.writer.lock().unwrap();
        let entry = CassetteEntry {
            digest: request.request_digest.clone(),
            request: request.clone(),
            completion: completion.clone(),
            seq: guard.1,
        };
        guard.1 += 1;
        let line = serde_json::to_string(&entry)
            .map_err(|e| GatewayError::Format(e.to_string()))?;
        writeln!(guard.0, "{line}")?;
        guard.0.flush()?;
        Ok(completion)
    }

    fn id(&self) -> String {
        format!("record({})", self.inner.id())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ChatMessage, ScriptedBackend};
    use crate::model::GenerationParams;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new(vec![ChatMessage::user(text)], GenerationParams::text())
    }

    #[test]
    fn record_then_replay_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cassette.jsonl");

        let recorder =
            RecordingBackend::create(ScriptedBackend::new(["one", "two", "three"]), &path)
                .unwrap();
        let recorded: Vec<Completion> = [req("a"), req("a"), req("b")]
            .iter()
            .map(|r| recorder.complete(r).unwrap())
            .collect();

        let replay = ReplayBackend::load(&path).unwrap();
        let replayed: Vec<Completion> = [req("a"), req("a"), req("b")]
            .iter()
            .map(|r| replay.complete(r).unwrap())
            .collect();
        assert_eq!(recorded, replayed);
    }

    #[test]
    fn repeated_identical_requests_keep_multiplicity_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let recorder =
            RecordingBackend::create(ScriptedBackend::new(["first", "second"]), &path).unwrap();
        recorder.complete(&req("same")).unwrap();
        recorder.complete(&req("same")).unwrap();

        let cassette = Cassette::load(&path).unwrap();
        assert_eq!(cassette.len(), 2);
        let list = &cassette.entries[&req("same").request_digest];
        assert_eq!(list[0].content, "first");
        assert_eq!(list[1].content, "second");
    }

    #[test]
    fn unknown_digest_is_missing_recording() {
        let replay = ReplayBackend::from_cassette(Cassette::default());
        assert!(matches!(
            replay.complete(&req("never recorded")),
            Err(GatewayError::MissingRecording(_))
        ));
    }

    #[test]
    fn exhausted_queue_is_missing_recording() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let recorder = RecordingBackend::create(ScriptedBackend::new(["only"]), &path).unwrap();
        recorder.complete(&req("x")).unwrap();

        let replay = ReplayBackend::load(&path).unwrap();
        replay.complete(&req("x")).unwrap();
        assert!(matches!(
            replay.complete(&req("x")),
            Err(GatewayError::MissingRecording(_))
        ));
    }

    #[test]
    fn empty_run_leaves_valid_empty_cassette() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let _recorder =
            RecordingBackend::create(ScriptedBackend::new(Vec::<String>::new()), &path).unwrap();
        let cassette = Cassette::load(&path).unwrap();
        assert!(cassette.is_empty());
    }
}
