use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ProviderError};

/// One provider attempt (or cache hit) as recorded in the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub ts_ms: u64,
    pub provider: String,
    pub model: String,
    #[serde(default)]
    pub subject: Option<String>,
    pub tag: String,
    pub repetition: u32,
    pub attempt: u32,
    pub cache_hit: bool,
    pub history_hash: String,
    pub request: String,
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
    pub request_chars: usize,
    pub response_chars: usize,
}

impl LogEntry {
    pub fn new(
        provider: &str,
        model: &str,
        request: &ChatRequest,
        attempt: u32,
        cache_hit: bool,
        result: Result<&str, &ProviderError>,
    ) -> Self {
        let ts_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let request_chars = request.messages.iter().map(|m| m.content.chars().count()).sum();
        let (response, error) = match result {
            Ok(r) => (Some(r.to_owned()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            ts_ms,
            provider: provider.to_owned(),
            model: model.to_owned(),
            subject: request.subject.clone(),
            tag: request.tag.clone(),
            repetition: request.repetition,
            attempt,
            cache_hit,
            history_hash: request.history_hash(),
            request: request.last_user().to_owned(),
            response_chars: response.as_ref().map_or(0, |r| r.chars().count()),
            response,
            error,
            request_chars,
        }
    }
}

/// Append-only JSON-lines log of every request/response pair in a run.
pub struct RunLog {
    file: Mutex<BufWriter<File>>,
}

impl RunLog {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            file: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn append(&self, entry: &LogEntry) -> io::Result<()> {
        let mut f = self.file.lock().unwrap();
        serde_json::to_writer(&mut *f, entry)?;
        f.write_all(b"\n")?;
        f.flush()
    }

    pub fn read(path: &Path) -> io::Result<Vec<LogEntry>> {
        let mut out = Vec::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(&line)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?,
            );
        }
        Ok(out)
    }
}
