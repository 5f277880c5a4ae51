use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ClientError, ModelClient, ModelRequest, ModelResponse};

/// One recorded exchange, stored as a JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request_hash: String,
    pub request: ModelRequest,
    pub response: ModelResponse,
}

pub fn load_transcripts(path: &Path) -> Result<Vec<TranscriptEntry>, ClientError> {
    let file = File::open(path).map_err(|e| ClientError::Io(format!("{}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ClientError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: TranscriptEntry = serde_json::from_str(&line)
            .map_err(|e| ClientError::Io(format!("{}:{}: {e}", path.display(), n + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Serves recorded responses; never touches the network.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    responses: HashMap<String, ModelResponse>,
}

impl ReplayClient {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut responses = HashMap::new();
        for e in entries {
            // first recording wins so replays of a retried request stay stable
            responses.entry(e.request_hash).or_insert(e.response);
        }
        Self { responses }
    }

    pub fn from_file(path: &Path) -> Result<Self, ClientError> {
        Ok(Self::new(load_transcripts(path)?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ModelClient for ReplayClient {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ClientError> {
        let hash = req.hash();
        self.responses.get(&hash).cloned().ok_or(ClientError::ReplayMiss(hash))
    }

    fn provider_tag(&self) -> &str {
        "replay"
    }
}

/// Forwards to `inner` and appends every successful exchange to a transcript.
pub struct RecordingClient<C> {
    inner: C,
    sink: Mutex<File>,
}

impl<C> RecordingClient<C> {
    pub fn create(inner: C, path: &Path) -> Result<Self, ClientError> {
        let sink = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ClientError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self { inner, sink: Mutex::new(sink) })
    }
}

impl<C: ModelClient> ModelClient for RecordingClient<C> {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ClientError> {
        let response = self.inner.complete(req)?;
        let entry = TranscriptEntry { request_hash: req.hash(), request: req.clone(), response: response.clone() };
        let mut line = serde_json::to_string(&entry).map_err(|e| ClientError::Io(e.to_string()))?;
        line.push('\n');
        let mut sink = self.sink.lock().expect("transcript lock");
        sink.write_all(line.as_bytes()).map_err(|e| ClientError::Io(e.to_string()))?;
        sink.flush().map_err(|e| ClientError::Io(e.to_string()))?;
        Ok(response)
    }

    fn provider_tag(&self) -> &str {
        self.inner.provider_tag()
    }
}
