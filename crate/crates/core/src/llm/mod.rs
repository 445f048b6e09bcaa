//! Provider-agnostic multi-turn chat client.
//!
//! A [`Conversation`] is a leading system message plus tagged user/assistant
//! turns. [`ChatClient::send`] extends it by one turn, going through the
//! response cache, the rate limiter, retries, and the run log.

mod cache;
mod limiter;
mod log;
mod mock;
mod remote;
mod replay;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use self::cache::ResponseCache;
pub use self::limiter::RateLimiter;
pub use self::log::{LogEntry, RunLog};
pub use self::mock::{MockProvider, MockRule, MockScript};
pub use self::remote::RemoteChatProvider;
pub use self::replay::ReplayProvider;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub tag: String,
    pub user: String,
    pub assistant: String,
}

/// Ordered chat history. Roles alternate by construction and every user
/// turn carries exactly one step tag.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    /// Session the conversation is about; mock scripts may address it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default)]
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn new(subject: Option<&str>, system: Option<&str>) -> Self {
        Self {
            subject: subject.map(str::to_owned),
            system: system.map(str::to_owned),
            turns: Vec::new(),
        }
    }

    pub fn messages(&self) -> Vec<Message> {
        let mut out = Vec::with_capacity(1 + 2 * self.turns.len());
        if let Some(s) = &self.system {
            out.push(Message::new(Role::System, s.clone()));
        }
        for t in &self.turns {
            out.push(Message::new(Role::User, t.user.clone()));
            out.push(Message::new(Role::Assistant, t.assistant.clone()));
        }
        out
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.turns.iter().map(|t| t.tag.as_str())
    }

    pub fn user_turns(&self) -> usize {
        self.turns.len()
    }

    pub fn push_turn(&mut self, tag: &str, user: &str, assistant: &str) {
        self.turns.push(Turn {
            tag: tag.to_owned(),
            user: user.to_owned(),
            assistant: assistant.to_owned(),
        });
    }
}

/// One provider call: full history ending in the new user message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub tag: String,
    pub subject: Option<String>,
    /// Distinguishes deliberate repeats of an identical request.
    pub repetition: u32,
}

impl ChatRequest {
    pub fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }

    /// Hash of the history and repetition; the replay key.
    pub fn history_hash(&self) -> String {
        #[derive(Serialize)]
        struct K<'a> {
            messages: &'a [Message],
            repetition: u32,
        }
        sha256_json(&K {
            messages: &self.messages,
            repetition: self.repetition,
        })
    }

    /// Hash of model, temperature, history and repetition; the cache key.
    pub fn cache_key(&self, model: &str, temperature: f64) -> String {
        #[derive(Serialize)]
        struct K<'a> {
            model: &'a str,
            temperature: f64,
            messages: &'a [Message],
            repetition: u32,
        }
        sha256_json(&K {
            model,
            temperature,
            messages: &self.messages,
            repetition: self.repetition,
        })
    }
}

fn sha256_json<T: Serialize>(v: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(v).expect("serializable")))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    /// Worth retrying: network failure, timeout, 429, 5xx.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider failure: {0}")]
    Fatal(String),
    #[error("mock script has no rule for step {tag} and no fallback")]
    ScriptMiss { tag: String },
}

pub trait ChatProvider: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("step {tag}: gave up after {attempts} attempt(s): {last}")]
    Exhausted {
        tag: String,
        attempts: u32,
        last: ProviderError,
    },
    #[error("step {tag}: {source}")]
    Provider {
        tag: String,
        #[source]
        source: ProviderError,
    },
    #[error("rate limit: waited longer than {0:?} for a request slot")]
    RateLimited(Duration),
    #[error("run log / cache i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("provider configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Remote,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: f64,
    pub requests_per_minute: Option<u32>,
    /// Environment variable holding the chat endpoint base URL.
    pub base_url_env: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub mock_script: Option<PathBuf>,
    pub replay_log: Option<PathBuf>,
    /// Replay only this provider's entries, under its id.
    pub replay_provider: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            max_retries: 3,
            timeout_secs: 60.0,
            requests_per_minute: None,
            base_url_env: "DICL_LLM_BASE_URL".into(),
            api_key_env: "DICL_LLM_API_KEY".into(),
            mock_script: None,
            replay_log: None,
            replay_provider: None,
        }
    }
}

impl ProviderConfig {
    pub fn mock(script: impl Into<PathBuf>) -> Self {
        Self {
            kind: ProviderKind::Mock,
            mock_script: Some(script.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0) {
            return Err(LlmError::Config("temperature must be >= 0".into()));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        Ok(())
    }

    /// Instantiates the configured backend.
    pub fn build_provider(&self) -> Result<Arc<dyn ChatProvider>, LlmError> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::Mock => {
                let path = self
                    .mock_script
                    .as_ref()
                    .ok_or_else(|| LlmError::Config("mock provider needs a mock_script".into()))?;
                Arc::new(MockProvider::new(MockScript::load(path)?))
            }
            ProviderKind::Replay => {
                let path = self
                    .replay_log
                    .as_ref()
                    .ok_or_else(|| LlmError::Config("replay provider needs a replay_log".into()))?;
                match &self.replay_provider {
                    Some(id) => Arc::new(ReplayProvider::for_provider(path, id)?),
                    None => Arc::new(ReplayProvider::from_log(path)?),
                }
            }
            ProviderKind::Remote => Arc::new(RemoteChatProvider::from_env(self)?),
        })
    }
}

/// Sends requests for one provider. Cheap to clone; clones share the cache,
/// log and rate limiter.
#[derive(Clone)]
pub struct ChatClient {
    provider: Arc<dyn ChatProvider>,
    model: String,
    temperature: f64,
    max_retries: u32,
    backoff_base: Duration,
    cache: Option<Arc<ResponseCache>>,
    log: Option<Arc<RunLog>>,
    limiter: Option<Arc<RateLimiter>>,
    limiter_patience: Duration,
}

impl ChatClient {
    pub fn new(provider: Arc<dyn ChatProvider>, config: &ProviderConfig) -> Self {
        Self {
            provider,
            model: config.model.clone(),
            temperature: config.temperature,
            max_retries: config.max_retries,
            backoff_base: Duration::from_millis(500),
            cache: None,
            log: None,
            limiter: config
                .requests_per_minute
                .map(|rpm| Arc::new(RateLimiter::per_minute(rpm))),
            limiter_patience: Duration::from_secs_f64(config.timeout_secs.max(1.0) * 10.0),
        }
    }

    /// Client over `provider` with default settings and no cache or log.
    pub fn bare(provider: Arc<dyn ChatProvider>) -> Self {
        Self::new(provider, &ProviderConfig::default())
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_log(mut self, log: Arc<RunLog>) -> Self {
        self.log = Some(log);
        self
    }

    pub fn with_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    pub fn provider_id(&self) -> String {
        self.provider.id()
    }

    pub fn send(
        &self,
        conversation: &mut Conversation,
        user_message: &str,
        tag: &str,
    ) -> Result<String, LlmError> {
        self.send_repeat(conversation, user_message, tag, 0)
    }

    /// Like [`send`](Self::send) but marks the request as repetition
    /// `repetition` of an otherwise identical request, so it is cached and
    /// replayed separately.
    pub fn send_repeat(
        &self,
        conversation: &mut Conversation,
        user_message: &str,
        tag: &str,
        repetition: u32,
    ) -> Result<String, LlmError> {
        let mut messages = conversation.messages();
        messages.push(Message::new(Role::User, user_message));
        let request = ChatRequest {
            messages,
            tag: tag.to_owned(),
            subject: conversation.subject.clone(),
            repetition,
        };
        let reply = self.complete(&request)?;
        conversation.push_turn(tag, user_message, &reply);
        Ok(reply)
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let key = request.cache_key(&self.model, self.temperature);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            self.record(request, 0, true, Ok(&hit))?;
            return Ok(hit);
        }
        let mut attempt = 0;
        loop {
            if let Some(l) = &self.limiter {
                if !l.acquire(self.limiter_patience) {
                    return Err(LlmError::RateLimited(self.limiter_patience));
                }
            }
            let result = self.provider.complete(request);
            self.record(request, attempt, false, result.as_ref().map(String::as_str))?;
            match result {
                Ok(text) => {
                    if let Some(c) = &self.cache {
                        c.insert(&key, &text)?;
                    }
                    return Ok(text);
                }
                Err(e @ ProviderError::Transient(_)) => {
                    if attempt >= self.max_retries {
                        return Err(LlmError::Exhausted {
                            tag: request.tag.clone(),
                            attempts: attempt + 1,
                            last: e,
                        });
                    }
                    let delay = self.backoff_base.saturating_mul(1u32 << attempt.min(16));
                    ::log::warn!(
                        "step {}: attempt {} failed ({e}); retrying in {delay:?}",
                        request.tag,
                        attempt + 1
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => {
                    return Err(LlmError::Provider {
                        tag: request.tag.clone(),
                        source: e,
                    })
                }
            }
        }
    }

    fn record(
        &self,
        request: &ChatRequest,
        attempt: u32,
        cache_hit: bool,
        result: Result<&str, &ProviderError>,
    ) -> Result<(), LlmError> {
        if let Some(log) = &self.log {
            log.append(&LogEntry::new(
                &self.provider.id(),
                &self.model,
                request,
                attempt,
                cache_hit,
                result,
            ))?;
        }
        Ok(())
    }
}
