//! Delivery of full logs from the monitored node to an interacting peer.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use pits_core::DeviceId;

use crate::entry::{LogEntry, LogLine};
use crate::AgentError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedLog {
    /// Device that logged (and submitted) the event.
    pub device: DeviceId,
    pub log: LogLine,
}

impl SharedLog {
    pub fn new(device: DeviceId, entry: &LogEntry) -> Self {
        SharedLog {
            device,
            log: LogLine::from(entry),
        }
    }
}

pub trait PeerTransport {
    fn deliver(&self, msg: &SharedLog) -> Result<(), AgentError>;
}

/// A peer's inbox directory; one JSON file per shared log.
#[derive(Clone, Debug)]
pub struct DirInbox {
    dir: PathBuf,
}

impl DirInbox {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        DirInbox {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    pub fn receive_all(&self) -> Result<Vec<SharedLog>, AgentError> {
        let mut out = Vec::new();
        if !self.dir.exists() {
            return Ok(out);
        }
        let mut paths: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        for p in paths {
            out.push(
                serde_json::from_slice(&fs::read(&p)?)
                    .map_err(|e| AgentError::Corrupt(format!("{}: {e}", p.display())))?,
            );
        }
        Ok(out)
    }
}

impl PeerTransport for DirInbox {
    fn deliver(&self, msg: &SharedLog) -> Result<(), AgentError> {
        fs::create_dir_all(&self.dir).map_err(|e| AgentError::Transport(e.to_string()))?;
        let entry = msg.log.to_entry()?;
        let name = format!("{}-{}.json", msg.log.ts, entry.digest.to_hex());
        let body = serde_json::to_vec(msg).expect("shared log serializes");
        fs::write(self.dir.join(name), body).map_err(|e| AgentError::Transport(e.to_string()))
    }
}

/// In-process inbox for simulations.
#[derive(Debug, Default)]
pub struct MemoryInbox {
    received: Mutex<Vec<SharedLog>>,
}

impl MemoryInbox {
    pub fn take(&self) -> Vec<SharedLog> {
        std::mem::take(&mut *self.received.lock().expect("inbox lock"))
    }
}

impl PeerTransport for MemoryInbox {
    fn deliver(&self, msg: &SharedLog) -> Result<(), AgentError> {
        self.received.lock().expect("inbox lock").push(msg.clone());
        Ok(())
    }
}
