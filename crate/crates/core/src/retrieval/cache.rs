//! Append-only embedding cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! file    := magic record*
//! magic   := "DICLEMB1"                      (8 bytes)
//! record  := provider_len:u16 provider:[u8; provider_len]
//!            text_sha256:[u8; 32] dim:u32 vector:[f32; dim]
//! ```
//!
//! A later record for the same `(provider, text_sha256)` supersedes an
//! earlier one. A truncated trailing record is trimmed from the file on load.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Mutex;

use sha2::{Digest, Sha256};

pub const CACHE_MAGIC: &[u8; 8] = b"DICLEMB1";

pub(crate) fn text_hash(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

type Key = (String, [u8; 32]);

pub struct EmbeddingCache {
    entries: Mutex<HashMap<Key, Vec<f32>>>,
    file: Mutex<BufWriter<File>>,
}

impl EmbeddingCache {
    pub fn open(path: &Path) -> io::Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let mut bytes = Vec::new();
            File::open(path)?.read_to_end(&mut bytes)?;
            if !bytes.is_empty() {
                if bytes.len() < 8 || &bytes[..8] != CACHE_MAGIC {
                    return Err(io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("{} is not an embedding cache", path.display()),
                    ));
                }
                let good = decode_records(&bytes[8..], &mut entries);
                if 8 + good < bytes.len() {
                    OpenOptions::new()
                        .write(true)
                        .open(path)?
                        .set_len((8 + good) as u64)?;
                }
            }
        }
        let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut file = BufWriter::new(file);
        if fresh {
            file.write_all(CACHE_MAGIC)?;
            file.flush()?;
        }
        Ok(Self {
            entries: Mutex::new(entries),
            file: Mutex::new(file),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, provider: &str, hash: &[u8; 32]) -> Option<Vec<f32>> {
        self.entries
            .lock()
            .unwrap()
            .get(&(provider.to_owned(), *hash))
            .cloned()
    }

    pub fn insert(&self, provider: &str, hash: [u8; 32], vector: &[f32]) -> io::Result<()> {
        let plen = u16::try_from(provider.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "provider id too long"))?;
        let dim = u32::try_from(vector.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "vector too long"))?;
        let mut rec = Vec::with_capacity(2 + provider.len() + 32 + 4 + vector.len() * 4);
        rec.extend_from_slice(&plen.to_le_bytes());
        rec.extend_from_slice(provider.as_bytes());
        rec.extend_from_slice(&hash);
        rec.extend_from_slice(&dim.to_le_bytes());
        for x in vector {
            rec.extend_from_slice(&x.to_le_bytes());
        }
        {
            let mut f = self.file.lock().unwrap();
            f.write_all(&rec)?;
            f.flush()?;
        }
        self.entries
            .lock()
            .unwrap()
            .insert((provider.to_owned(), hash), vector.to_vec());
        Ok(())
    }
}

// Returns the number of bytes consumed by complete records.
fn decode_records(mut buf: &[u8], out: &mut HashMap<Key, Vec<f32>>) -> usize {
    let total = buf.len();
    fn take<'a>(buf: &mut &'a [u8], n: usize) -> Option<&'a [u8]> {
        if buf.len() < n {
            return None;
        }
        let (head, tail) = buf.split_at(n);
        *buf = tail;
        Some(head)
    }
    let mut consumed = 0;
    while !buf.is_empty() {
        let parsed = (|| {
            let plen = u16::from_le_bytes(take(&mut buf, 2)?.try_into().ok()?) as usize;
            let provider = String::from_utf8(take(&mut buf, plen)?.to_vec()).ok()?;
            let hash: [u8; 32] = take(&mut buf, 32)?.try_into().ok()?;
            let dim = u32::from_le_bytes(take(&mut buf, 4)?.try_into().ok()?) as usize;
            let raw = take(&mut buf, dim.checked_mul(4)?)?;
            let vector = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Some(((provider, hash), vector))
        })();
        match parsed {
            Some((k, v)) => {
                out.insert(k, v);
            }
            None => {
                log::warn!("embedding cache: dropping truncated trailing record");
                break;
            }
        }
        consumed = total - buf.len();
    }
    consumed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_as_documented() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let c = EmbeddingCache::open(&path).unwrap();
        let h = text_hash("a b c");
        c.insert("p", h, &[1.0, -0.5]).unwrap();
        drop(c);
        let bytes = std::fs::read(&path).unwrap();
        let mut expected = CACHE_MAGIC.to_vec();
        expected.extend_from_slice(&1u16.to_le_bytes());
        expected.extend_from_slice(b"p");
        expected.extend_from_slice(&h);
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-0.5f32).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn truncated_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let c = EmbeddingCache::open(&path).unwrap();
        c.insert("p", text_hash("x"), &[0.25; 3]).unwrap();
        c.insert("p", text_hash("y"), &[0.5; 3]).unwrap();
        drop(c);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let c = EmbeddingCache::open(&path).unwrap();
        assert_eq!(c.get("p", &text_hash("x")), Some(vec![0.25; 3]));
        assert_eq!(c.get("p", &text_hash("y")), None);
        // appends after recovery stay readable
        c.insert("p", text_hash("z"), &[1.0]).unwrap();
        drop(c);
        let c = EmbeddingCache::open(&path).unwrap();
        assert_eq!(c.get("p", &text_hash("z")), Some(vec![1.0]));
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn foreign_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        std::fs::write(&path, b"hello world").unwrap();
        assert!(EmbeddingCache::open(&path).is_err());
    }
}
