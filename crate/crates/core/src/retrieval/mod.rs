//! Neighbor session retrieval.
//!
//! Item titles are reduced to lowercase alphanumeric tokens without stop
//! words, concatenated per session, embedded, and ranked by cosine
//! similarity against the training sessions.

mod cache;
mod embed;
mod index;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{Item, Session};

pub use cache::{EmbeddingCache, CACHE_MAGIC};
pub use embed::{
    embed_sessions, EmbedError, EmbeddingProvider, HashEmbedder, RemoteEmbedder, SessionEmbedding,
    HASH_EMBED_DIM,
};
pub use index::{cosine, top_k_neighbors, Neighbor, NeighborIndex};

const STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");

/// A stop-word set. Entries are normalized with the same character rule
/// as titles, so "don't" also removes the token "dont".
#[derive(Debug, Clone)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn english() -> Self {
        Self::from_lines(STOPWORDS_EN)
    }

    pub fn from_lines(text: &str) -> Self {
        let mut set = HashSet::new();
        for line in text.lines() {
            set.extend(normalize(line).split_whitespace().map(str::to_owned));
            let raw = line.trim().to_lowercase();
            if !raw.is_empty() {
                set.insert(raw);
            }
        }
        Self(set)
    }

    pub fn empty() -> Self {
        Self(HashSet::new())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemDescription {
    pub item_id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDescription {
    pub session_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub k: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { k: 1 }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("session {session_id} references unknown item {item_id}")]
pub struct DanglingItem {
    pub session_id: String,
    pub item_id: String,
}

// lowercase, whitespace to ' ', drop everything outside [a-z0-9 ]
fn normalize(raw: &str) -> String {
    raw.chars()
        .flat_map(char::to_lowercase)
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if c.is_ascii_lowercase() || c.is_ascii_digit() {
                Some(c)
            } else {
                None
            }
        })
        .collect()
}

pub fn preprocess_title(item_id: &str, raw_title: &str, stopwords: &StopWords) -> ItemDescription {
    let tokens = normalize(raw_title)
        .split_whitespace()
        .filter(|t| !stopwords.contains(t))
        .map(str::to_owned)
        .collect();
    ItemDescription {
        item_id: item_id.to_owned(),
        tokens,
    }
}

/// Concatenates the item descriptions of a session in order. Repeated items
/// contribute their tokens once per occurrence.
pub fn session_description(
    session: &Session,
    descriptions: &BTreeMap<String, ItemDescription>,
) -> Result<SessionDescription, DanglingItem> {
    let mut parts: Vec<&str> = Vec::new();
    for id in &session.item_ids {
        let d = descriptions.get(id).ok_or_else(|| DanglingItem {
            session_id: session.session_id.clone(),
            item_id: id.clone(),
        })?;
        parts.extend(d.tokens.iter().map(String::as_str));
    }
    Ok(SessionDescription {
        session_id: session.session_id.clone(),
        text: parts.join(" "),
    })
}

pub fn describe_catalog(
    catalog: &BTreeMap<String, Item>,
    stopwords: &StopWords,
) -> BTreeMap<String, ItemDescription> {
    catalog
        .values()
        .map(|it| {
            (
                it.item_id.clone(),
                preprocess_title(&it.item_id, &it.raw_title, stopwords),
            )
        })
        .collect()
}
