use std::collections::HashMap;
use std::path::Path;

use super::{ChatProvider, ChatRequest, LlmError, ProviderError, RunLog};

/// Answers requests from a previous run's log, keyed by history hash.
pub struct ReplayProvider {
    responses: HashMap<String, String>,
    id: String,
}

impl ReplayProvider {
    pub fn from_log(path: &Path) -> Result<Self, LlmError> {
        Self::load(path, None)
    }

    /// Replays only the entries recorded for provider `id` and reports that
    /// id as its own, so a replayed run is indistinguishable from the
    /// original. Needed when several providers saw identical requests.
    pub fn for_provider(path: &Path, id: &str) -> Result<Self, LlmError> {
        Self::load(path, Some(id))
    }

    fn load(path: &Path, only: Option<&str>) -> Result<Self, LlmError> {
        let mut responses = HashMap::new();
        for e in RunLog::read(path)? {
            if only.is_some_and(|id| id != e.provider) {
                continue;
            }
            if let Some(r) = e.response {
                responses.entry(e.history_hash).or_insert(r);
            }
        }
        Ok(Self {
            responses,
            id: only.unwrap_or("replay").to_owned(),
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatProvider for ReplayProvider {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.responses
            .get(&request.history_hash())
            .cloned()
            .ok_or_else(|| {
                ProviderError::Fatal(format!(
                    "replay log has no response for step {} (history {})",
                    request.tag,
                    request.history_hash()
                ))
            })
    }
}
