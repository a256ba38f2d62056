//! Run directory layout and checkpoint persistence.
//!
//! ```text
//! <run-dir>/config.toml        config snapshot
//! <run-dir>/events.jsonl       one JSON record per event, no timestamps
//! <run-dir>/llm_calls.jsonl    successful model calls (a valid replay transcript)
//! <run-dir>/checkpoint.json    latest RunState, wrapped with its sha256
//! <run-dir>/solutions/         <id>.<ext> code, <id>.log, <id>.artifact.json
//! <run-dir>/best/              best program, artifact and metadata
//! <run-dir>/summary.json
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EngineError, RunState};
use crate::population::SolutionId;

pub const CONFIG_FILE: &str = "config.toml";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const CALLS_FILE: &str = "llm_calls.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SOLUTIONS_DIR: &str = "solutions";
pub const BEST_DIR: &str = "best";

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> EngineError {
    let context = context.into();
    move |source| EngineError::Io { context, source }
}

#[derive(Clone, Debug)]
pub struct RunDir {
    root: PathBuf,
    extension: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    sha256: String,
    /// The serialized RunState, kept as text so the digest covers exact bytes.
    state: String,
}

impl RunDir {
    pub fn new(root: &Path, extension: &str) -> Self {
        RunDir { root: root.to_path_buf(), extension: extension.to_string() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn create(&self) -> Result<(), EngineError> {
        for dir in [self.root.clone(), self.path(SOLUTIONS_DIR)] {
            fs::create_dir_all(&dir).map_err(io_err(format!("creating {}", dir.display())))?;
        }
        Ok(())
    }

    pub fn code_path(&self, id: &SolutionId) -> PathBuf {
        self.path(SOLUTIONS_DIR).join(format!("{id}.{}", self.extension))
    }

    pub fn log_path(&self, id: &SolutionId) -> PathBuf {
        self.path(SOLUTIONS_DIR).join(format!("{id}.log"))
    }

    pub fn artifact_path(&self, id: &SolutionId) -> PathBuf {
        self.path(SOLUTIONS_DIR).join(format!("{id}.artifact.json"))
    }

    /// Relative log reference stored on the solution.
    pub fn log_ref(&self, id: &SolutionId) -> String {
        format!("{SOLUTIONS_DIR}/{id}.log")
    }

    pub fn write_solution(
        &self,
        id: &SolutionId,
        code: &str,
        log: &str,
        artifact: Option<&[u8]>,
    ) -> Result<(), EngineError> {
        let write = |p: PathBuf, bytes: &[u8]| fs::write(&p, bytes).map_err(io_err(format!("writing {}", p.display())));
        if !code.is_empty() {
            write(self.code_path(id), code.as_bytes())?;
        }
        write(self.log_path(id), log.as_bytes())?;
        if let Some(a) = artifact {
            write(self.artifact_path(id), a)?;
        }
        Ok(())
    }

    /// Mirrors a migrant's files under its new id.
    pub fn copy_solution(&self, from: &SolutionId, to: &SolutionId) -> Result<(), EngineError> {
        for (src, dst) in
            [(self.code_path(from), self.code_path(to)), (self.artifact_path(from), self.artifact_path(to))]
        {
            if src.exists() {
                fs::copy(&src, &dst).map_err(io_err(format!("copying {}", src.display())))?;
            }
        }
        Ok(())
    }

    pub fn read_artifact(&self, id: &SolutionId) -> Option<Vec<u8>> {
        fs::read(self.artifact_path(id)).ok()
    }

    /// Appends JSON lines; returns the number of bytes written.
    pub fn append_jsonl<T: Serialize>(&self, name: &str, records: &[T]) -> Result<u64, EngineError> {
        if records.is_empty() {
            return Ok(0);
        }
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).expect("records serialize");
            buf.push(b'\n');
        }
        let path = self.path(name);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(format!("opening {}", path.display())))?;
        f.write_all(&buf).map_err(io_err(format!("appending to {}", path.display())))?;
        Ok(buf.len() as u64)
    }

    /// Cuts `name` back to `len` bytes (creating it empty if missing).
    pub fn truncate(&self, name: &str, len: u64) -> Result<(), EngineError> {
        let path = self.path(name);
        let f = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(false)
            .open(&path)
            .map_err(io_err(format!("opening {}", path.display())))?;
        let actual = f.metadata().map_err(io_err(format!("reading {}", path.display())))?.len();
        if actual < len {
            return Err(EngineError::Integrity(format!(
                "{} is shorter ({actual} bytes) than the checkpoint expects ({len})",
                path.display()
            )));
        }
        f.set_len(len).map_err(io_err(format!("truncating {}", path.display())))
    }

    /// Writes `contents` to a sibling temp file, then renames it into place.
    pub fn write_atomic(&self, name: &str, contents: &[u8]) -> Result<(), EngineError> {
        let path = self.path(name);
        let tmp = self.path(&format!("{name}.tmp"));
        let mut f = File::create(&tmp).map_err(io_err(format!("creating {}", tmp.display())))?;
        f.write_all(contents).map_err(io_err(format!("writing {}", tmp.display())))?;
        f.sync_all().map_err(io_err(format!("syncing {}", tmp.display())))?;
        fs::rename(&tmp, &path).map_err(io_err(format!("replacing {}", path.display())))
    }

    pub fn save_checkpoint(&self, state: &RunState) -> Result<(), EngineError> {
        let text = serde_json::to_string(state).expect("state serializes");
        let wrapped = CheckpointFile { sha256: hex::encode(Sha256::digest(text.as_bytes())), state: text };
        self.write_atomic(CHECKPOINT_FILE, serde_json::to_string(&wrapped).expect("serializes").as_bytes())
    }

    pub fn load_checkpoint(&self) -> Result<RunState, EngineError> {
        let path = self.path(CHECKPOINT_FILE);
        let raw = fs::read_to_string(&path).map_err(io_err(format!("reading {}", path.display())))?;
        let wrapped: CheckpointFile =
            serde_json::from_str(&raw).map_err(|e| EngineError::Integrity(format!("unreadable checkpoint: {e}")))?;
        let digest = hex::encode(Sha256::digest(wrapped.state.as_bytes()));
        if digest != wrapped.sha256 {
            return Err(EngineError::Integrity("checkpoint digest mismatch".into()));
        }
        serde_json::from_str(&wrapped.state)
            .map_err(|e| EngineError::Integrity(format!("malformed checkpoint state: {e}")))
    }
}
