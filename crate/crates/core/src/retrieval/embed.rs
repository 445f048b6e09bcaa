use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::cache::{text_hash, EmbeddingCache};
use super::SessionDescription;

pub const HASH_EMBED_DIM: usize = 384;
const REMOTE_BATCH: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding provider {provider} unavailable: {message}")]
    Unavailable { provider: String, message: String },
    #[error("embedding provider returned malformed response: {0}")]
    BadResponse(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("embedding contains a non-finite component")]
    NonFinite,
    #[error("embedding cache i/o: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEmbedding {
    pub session_id: String,
    pub vector: Vec<f32>,
}

impl SessionEmbedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier; part of the cache key.
    fn id(&self) -> String;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError>;
}

/// Feature-hashes whitespace tokens into a fixed-width count vector and
/// L2-normalizes it. The empty text maps to the zero vector.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self {
            dim: HASH_EMBED_DIM,
        }
    }
}

impl HashEmbedder {
    pub fn with_dim(dim: usize) -> Self {
        assert!(dim > 0);
        Self { dim }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut counts = vec![0f64; self.dim];
        for tok in text.split_whitespace() {
            counts[(fnv1a(tok.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            counts.iter().map(|c| (c / norm) as f32).collect()
        } else {
            vec![0f32; self.dim]
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-fnv1a-{}", self.dim)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    model: String,
    dim: usize,
    embeddings: Vec<Vec<f32>>,
}

#[derive(Debug, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
    pub dim: usize,
}

/// Client for the embedding microservice (`POST /embed`, `GET /health`).
pub struct RemoteEmbedder {
    base_url: String,
    model_hint: String,
    http: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, EmbedError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Unavailable {
                provider: base_url.to_owned(),
                message: e.to_string(),
            })?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_owned(),
            model_hint: String::new(),
            http,
        })
    }

    /// Queries `/health` and records the served model name for the cache key.
    pub fn health(&mut self) -> Result<HealthResponse, EmbedError> {
        let resp = self
            .http
            .get(format!("{}/health", self.base_url))
            .send()
            .map_err(|e| self.unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(self.unavailable(format!("health returned {}", resp.status())));
        }
        let h: HealthResponse = resp
            .json()
            .map_err(|e| EmbedError::BadResponse(e.to_string()))?;
        self.model_hint = h.model.clone();
        Ok(h)
    }

    fn unavailable(&self, message: String) -> EmbedError {
        EmbedError::Unavailable {
            provider: self.base_url.clone(),
            message,
        }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote:{}:{}", self.base_url, self.model_hint)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(REMOTE_BATCH) {
            let resp = self
                .http
                .post(format!("{}/embed", self.base_url))
                .json(&EmbedRequest { texts: chunk })
                .send()
                .map_err(|e| self.unavailable(e.to_string()))?;
            let status = resp.status();
            if status.as_u16() == 503 {
                return Err(self.unavailable("model not loaded (503)".into()));
            }
            if !status.is_success() {
                return Err(EmbedError::BadResponse(format!("status {status}")));
            }
            let body: EmbedResponse = resp
                .json()
                .map_err(|e| EmbedError::BadResponse(e.to_string()))?;
            if body.embeddings.len() != chunk.len() {
                return Err(EmbedError::BadResponse(format!(
                    "{} texts sent, {} embeddings returned by {}",
                    chunk.len(),
                    body.embeddings.len(),
                    body.model
                )));
            }
            for v in body.embeddings {
                if v.len() != body.dim {
                    return Err(EmbedError::DimMismatch {
                        expected: body.dim,
                        got: v.len(),
                    });
                }
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// Embeds each description, consulting and extending `cache` when given.
/// Output order matches input order.
pub fn embed_sessions(
    descriptions: &[SessionDescription],
    provider: &dyn EmbeddingProvider,
    cache: Option<&EmbeddingCache>,
) -> Result<Vec<SessionEmbedding>, EmbedError> {
    let pid = provider.id();
    let mut vectors: Vec<Option<Vec<f32>>> = vec![None; descriptions.len()];
    let mut misses: Vec<usize> = Vec::new();
    for (n, d) in descriptions.iter().enumerate() {
        match cache.and_then(|c| c.get(&pid, &text_hash(&d.text))) {
            Some(v) => vectors[n] = Some(v),
            None => misses.push(n),
        }
    }

    if !misses.is_empty() {
        // identical texts are embedded once
        let mut unique: Vec<String> = misses
            .iter()
            .map(|&n| descriptions[n].text.clone())
            .collect();
        unique.sort();
        unique.dedup();
        let fresh = provider.embed(&unique)?;
        if fresh.len() != unique.len() {
            return Err(EmbedError::BadResponse(format!(
                "{} texts, {} vectors",
                unique.len(),
                fresh.len()
            )));
        }
        for (text, v) in unique.iter().zip(&fresh) {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::NonFinite);
            }
            if let Some(c) = cache {
                c.insert(&pid, text_hash(text), v)?;
            }
        }
        for &n in &misses {
            let pos = unique.binary_search(&descriptions[n].text).expect("deduped");
            vectors[n] = Some(fresh[pos].clone());
        }
    }

    let mut dim = None;
    let mut out = Vec::with_capacity(descriptions.len());
    for (d, v) in descriptions.iter().zip(vectors) {
        let v = v.expect("filled");
        match dim {
            None => dim = Some(v.len()),
            Some(expected) if expected != v.len() => {
                return Err(EmbedError::DimMismatch {
                    expected,
                    got: v.len(),
                })
            }
            _ => {}
        }
        out.push(SessionEmbedding {
            session_id: d.session_id.clone(),
            vector: v,
        });
    }
    Ok(out)
}
