//! Append-only local log store (`logs.jsonl`).

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use pits_core::Digest;

use crate::entry::{LogEntry, LogLine};
use crate::AgentError;

#[derive(Debug, Default)]
pub struct LogStore {
    path: Option<PathBuf>,
    entries: Vec<LogEntry>,
}

impl LogStore {
    pub fn in_memory() -> Self {
        LogStore::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = Vec::new();
        if path.exists() {
            for line in BufReader::new(fs::File::open(&path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: LogLine =
                    serde_json::from_str(&line).map_err(|e| AgentError::Corrupt(format!("log store line: {e}")))?;
                entries.push(parsed.to_entry()?);
            }
        }
        Ok(LogStore {
            path: Some(path),
            entries,
        })
    }

    pub fn append(&mut self, entry: LogEntry) -> Result<(), AgentError> {
        if let Some(path) = &self.path {
            let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
            let line = serde_json::to_string(&LogLine::from(&entry)).expect("log line serializes");
            writeln!(f, "{line}")?;
            f.sync_data()?;
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn last(&self) -> Option<&LogEntry> {
        self.entries.last()
    }

    pub fn find(&self, digest: &Digest) -> Option<&LogEntry> {
        self.entries.iter().find(|e| e.digest == *digest)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// In-memory stores only: lets the harness play an intruder with write access.
    pub fn entries_mut(&mut self) -> &mut Vec<LogEntry> {
        &mut self.entries
    }
}
