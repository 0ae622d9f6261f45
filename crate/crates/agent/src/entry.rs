//! Log entries and their line-delimited on-disk form.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use pits_core::{hash, Digest, EpochId, TimestampOffset, TreeParams};

use crate::AgentError;

/// `H(content ‖ ts)` with `ts` as 8 big-endian bytes of absolute native ticks.
pub fn log_digest(content: &[u8], ts: u64) -> Digest {
    let mut buf = Vec::with_capacity(content.len() + 8);
    buf.extend_from_slice(content);
    buf.extend_from_slice(&ts.to_be_bytes());
    hash(&buf)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    /// Absolute wall-clock time in native ticks since the Unix epoch.
    pub ts: u64,
    pub content: Vec<u8>,
    pub digest: Digest,
}

impl LogEntry {
    pub fn new(content: impl Into<Vec<u8>>, ts: u64) -> Self {
        let content = content.into();
        let digest = log_digest(&content, ts);
        LogEntry { ts, content, digest }
    }

    pub fn digest_matches(&self) -> bool {
        log_digest(&self.content, self.ts) == self.digest
    }

    pub fn locate(&self, params: &TreeParams) -> (EpochId, TimestampOffset) {
        params.locate(self.ts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentEncoding {
    Utf8,
    Base64,
}

/// One line of the local log store; content round-trips byte-exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogLine {
    pub ts: u64,
    pub encoding: ContentEncoding,
    pub content: String,
}

impl From<&LogEntry> for LogLine {
    fn from(e: &LogEntry) -> Self {
        match std::str::from_utf8(&e.content) {
            Ok(s) => LogLine {
                ts: e.ts,
                encoding: ContentEncoding::Utf8,
                content: s.to_owned(),
            },
            Err(_) => LogLine {
                ts: e.ts,
                encoding: ContentEncoding::Base64,
                content: B64.encode(&e.content),
            },
        }
    }
}

impl LogLine {
    pub fn to_entry(&self) -> Result<LogEntry, AgentError> {
        let content = match self.encoding {
            ContentEncoding::Utf8 => self.content.as_bytes().to_vec(),
            ContentEncoding::Base64 => B64
                .decode(&self.content)
                .map_err(|e| AgentError::Corrupt(format!("bad base64 content: {e}")))?,
        };
        Ok(LogEntry::new(content, self.ts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_is_bound_into_digest() {
        let a = LogEntry::new("same", 1000);
        let b = LogEntry::new("same", 1001);
        assert_ne!(a.digest, b.digest);
        assert!(a.digest_matches());
    }

    #[test]
    fn lines_round_trip_binary_and_text() {
        for content in [b"plain text".to_vec(), vec![0xff, 0x00, 0xfe, b'\n']] {
            let e = LogEntry::new(content, 42);
            let line = LogLine::from(&e);
            let json = serde_json::to_string(&line).unwrap();
            assert!(!json.contains('\n'));
            let back: LogLine = serde_json::from_str(&json).unwrap();
            assert_eq!(back.to_entry().unwrap(), e);
        }
    }
}
