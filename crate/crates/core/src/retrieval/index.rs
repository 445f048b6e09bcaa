use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::embed::{EmbedError, SessionEmbedding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub session_id: String,
    pub score: f64,
}

/// Cosine similarity accumulated in f64. Defined as 0 when either side is
/// the zero vector.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0f64;
    let mut na = 0f64;
    let mut nb = 0f64;
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Exact top-k by cosine: descending score, ties by ascending session id.
/// The caller excludes the query's own session from `corpus`.
pub fn top_k_neighbors(
    query: &SessionEmbedding,
    corpus: &[SessionEmbedding],
    k: usize,
) -> Result<Vec<Neighbor>, EmbedError> {
    let mut scored = Vec::with_capacity(corpus.len());
    for c in corpus {
        if c.dim() != query.dim() {
            return Err(EmbedError::DimMismatch {
                expected: query.dim(),
                got: c.dim(),
            });
        }
        scored.push(Neighbor {
            session_id: c.session_id.clone(),
            score: cosine(&query.vector, &c.vector),
        });
    }
    scored.sort_by(rank_order);
    scored.truncate(k);
    Ok(scored)
}

fn rank_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.session_id.cmp(&b.session_id))
}

/// Build-once index over the training embeddings.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    corpus: Vec<SessionEmbedding>,
}

impl NeighborIndex {
    pub fn new(corpus: Vec<SessionEmbedding>) -> Result<Self, EmbedError> {
        if let Some(first) = corpus.first() {
            if let Some(bad) = corpus.iter().find(|c| c.dim() != first.dim()) {
                return Err(EmbedError::DimMismatch {
                    expected: first.dim(),
                    got: bad.dim(),
                });
            }
        }
        Ok(Self { corpus })
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }

    /// Top-k excluding the query's own session id.
    pub fn query(&self, q: &SessionEmbedding, k: usize) -> Result<Vec<Neighbor>, EmbedError> {
        let others: Vec<SessionEmbedding> = self
            .corpus
            .iter()
            .filter(|c| c.session_id != q.session_id)
            .cloned()
            .collect();
        top_k_neighbors(q, &others, k)
    }
}
