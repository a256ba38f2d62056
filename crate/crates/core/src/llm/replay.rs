//! Deterministic stand-in backend that returns scripted responses.
//!
//! Transcripts are line-delimited JSON records `{"index": n, "response": ...}`
//! with optional `island` and `digest` fields. Lookup is by (island, index),
//! falling back to a record without an island. In strict mode the record's
//! digest must match the request. A run's own `llm_calls.jsonl` is a valid
//! transcript, so any recorded run can be replayed.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatCall, TransportError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub island: Option<usize>,
    pub index: u64,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
}

impl TranscriptRecord {
    pub fn new(island: Option<usize>, index: u64, response: impl Into<String>) -> Self {
        TranscriptRecord { island, index, response: response.into(), digest: None }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReplayBackend {
    records: HashMap<(Option<usize>, u64), TranscriptRecord>,
    strict: bool,
}

impl ReplayBackend {
    pub fn new(records: impl IntoIterator<Item = TranscriptRecord>) -> Self {
        let records = records.into_iter().map(|r| ((r.island, r.index), r)).collect();
        ReplayBackend { records, strict: false }
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(read_transcript(path)?))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, TransportError> {
        let record = self
            .records
            .get(&(Some(call.island), call.index))
            .or_else(|| self.records.get(&(None, call.index)))
            .ok_or_else(|| {
                TransportError::fatal(format!("no scripted response for island {} call {}", call.island, call.index))
            })?;
        if self.strict && record.digest.as_deref() != Some(call.digest) {
            return Err(TransportError::fatal(format!(
                "request digest mismatch for island {} call {}",
                call.island, call.index
            )));
        }
        Ok(record.response.clone())
    }
}

pub fn read_transcript(path: &Path) -> std::io::Result<Vec<TranscriptRecord>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_transcript(path: &Path, records: &[TranscriptRecord]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}
