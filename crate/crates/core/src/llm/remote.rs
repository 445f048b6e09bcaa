use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, LlmError, Message, ProviderConfig, ProviderError};

/// Chat-completions style HTTP backend (`POST {base}/chat/completions`).
pub struct RemoteChatProvider {
    base_url: String,
    api_key: Option<String>,
    model: String,
    temperature: f64,
    http: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [Message],
}

#[derive(Deserialize)]
struct Reply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

impl RemoteChatProvider {
    pub fn new(
        base_url: &str,
        api_key: Option<String>,
        config: &ProviderConfig,
    ) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_owned(),
            api_key,
            model: config.model.clone(),
            temperature: config.temperature,
            http,
        })
    }

    /// Reads the base URL and key from the environment variables named in
    /// `config`.
    pub fn from_env(config: &ProviderConfig) -> Result<Self, LlmError> {
        let base = std::env::var(&config.base_url_env).map_err(|_| {
            LlmError::Config(format!(
                "remote provider needs ${} (chat endpoint base URL)",
                config.base_url_env
            ))
        })?;
        let key = std::env::var(&config.api_key_env).ok();
        Self::new(&base, key, config)
    }
}

impl ChatProvider for RemoteChatProvider {
    fn id(&self) -> String {
        format!("remote:{}:{}", self.base_url, self.model)
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let mut rb = self
            .http
            .post(format!("{}/chat/completions", self.base_url))
            .json(&Body {
                model: &self.model,
                temperature: self.temperature,
                messages: &request.messages,
            });
        if let Some(k) = &self.api_key {
            rb = rb.bearer_auth(k);
        }
        let resp = rb
            .send()
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(ProviderError::Transient(format!("status {status}")));
        }
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(ProviderError::Fatal(format!("status {status}: {body}")));
        }
        let reply: Reply = resp
            .json()
            .map_err(|e| ProviderError::Fatal(format!("malformed reply: {e}")))?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Fatal("reply has no message content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ChatClient, Conversation, RunLog};
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    fn serve(responses: Vec<(u16, &'static str)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let h = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (mut s, _) = listener.accept().unwrap();
                let mut buf = vec![0u8; 65536];
                let mut got = Vec::new();
                loop {
                    let n = s.read(&mut buf).unwrap();
                    got.extend_from_slice(&buf[..n]);
                    let t = String::from_utf8_lossy(&got).to_string();
                    if let Some(end) = t.find("\r\n\r\n") {
                        let len = t[..end]
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        if got.len() >= end + 4 + len {
                            seen.push(t);
                            break;
                        }
                    }
                    if n == 0 {
                        break;
                    }
                }
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                s.write_all(reply.as_bytes()).unwrap();
            }
            seen
        });
        (format!("http://{addr}/v1"), h)
    }

    #[test]
    fn chat_completion_round_trip() {
        let (url, server) = serve(vec![(
            200,
            r#"{"choices":[{"message":{"role":"assistant","content":"{'bundle 1': ['product 1', 'product 2']}"}}]}"#,
        )]);
        let cfg = ProviderConfig::default();
        let p = RemoteChatProvider::new(&url, Some("k".into()), &cfg).unwrap();
        let client = ChatClient::new(Arc::new(p), &cfg);
        let mut conv = Conversation::new(None, Some("sys"));
        let r = client.send(&mut conv, "detect", "initial_bundles").unwrap();
        assert_eq!(r, "{'bundle 1': ['product 1', 'product 2']}");
        let reqs = server.join().unwrap();
        assert!(reqs[0].starts_with("POST /v1/chat/completions"));
        assert!(reqs[0].to_ascii_lowercase().contains("authorization: bearer k"));
        assert!(reqs[0].contains(r#""temperature":0.0"#));
        assert!(reqs[0].contains(r#"{"role":"system","content":"sys"}"#));
    }

    #[test]
    fn server_errors_are_retried_then_succeed() {
        let (url, server) = serve(vec![
            (503, "{}"),
            (500, "{}"),
            (200, r#"{"choices":[{"message":{"content":"ok"}}]}"#),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let log = Arc::new(RunLog::open(&dir.path().join("l.jsonl")).unwrap());
        let cfg = ProviderConfig {
            max_retries: 2,
            ..ProviderConfig::default()
        };
        let p = RemoteChatProvider::new(&url, None, &cfg).unwrap();
        let client = ChatClient::new(Arc::new(p), &cfg)
            .with_log(log)
            .with_backoff(Duration::from_millis(1));
        let r = client
            .send(&mut Conversation::new(None, None), "x", "rules")
            .unwrap();
        assert_eq!(r, "ok");
        server.join().unwrap();
        let entries = RunLog::read(&dir.path().join("l.jsonl")).unwrap();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[2].response.as_deref(), Some("ok"));
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, server) = serve(vec![(401, r#"{"error":"bad key"}"#)]);
        let cfg = ProviderConfig::default();
        let p = RemoteChatProvider::new(&url, None, &cfg).unwrap();
        let err = ChatClient::new(Arc::new(p), &cfg)
            .send(&mut Conversation::new(None, None), "x", "rules")
            .unwrap_err();
        assert!(matches!(err, LlmError::Provider { .. }));
        server.join().unwrap();
    }

    #[test]
    fn unreachable_endpoint_exhausts_retries() {
        // bind then drop to get a port nobody listens on
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let cfg = ProviderConfig {
            max_retries: 2,
            timeout_secs: 2.0,
            ..ProviderConfig::default()
        };
        let p = RemoteChatProvider::new(&format!("http://127.0.0.1:{port}"), None, &cfg).unwrap();
        let err = ChatClient::new(Arc::new(p), &cfg)
            .with_backoff(Duration::from_millis(1))
            .send(&mut Conversation::new(None, None), "x", "rules")
            .unwrap_err();
        assert!(matches!(err, LlmError::Exhausted { attempts: 3, .. }));
    }
}
