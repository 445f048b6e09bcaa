//! Session datasets: loading, validation and the chronological split.
//!
//! The on-disk format is line-delimited JSON with two record kinds:
//!
//! ```text
//! {"type":"item","item_id":"i1","title":"Samsung Galaxy Tab 3"}
//! {"type":"session","session_id":"s1","user_id":"u1","timestamp":1370000000,
//!  "items":["i1","i2"],"bundles":[{"items":["i1","i2"],"intent":"tablet protection setup"}]}
//! ```
//!
//! Records may appear in any order; references are resolved after the whole
//! file has been read. `bundles` may be omitted for unlabeled sessions.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error reading dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: session {session_id} references unknown item {item_id}")]
    DanglingItem {
        line: usize,
        session_id: String,
        item_id: String,
    },
    #[error("line {line}: duplicate session id {session_id}")]
    DuplicateSession { line: usize, session_id: String },
    #[error("line {line}: duplicate item id {item_id}")]
    DuplicateItem { line: usize, item_id: String },
    #[error("line {line}: session {session_id} has a ground-truth bundle with {size} item(s); bundles need at least 2")]
    BundleTooSmall {
        line: usize,
        session_id: String,
        size: usize,
    },
    #[error("line {line}: session {session_id} has a ground-truth bundle item {item_id} that is not in the session")]
    BundleOutsideSession {
        line: usize,
        session_id: String,
        item_id: String,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("split needs at least 3 sessions, got {0}")]
    TooFewSessions(usize),
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub raw_title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub user_id: String,
    pub timestamp: i64,
    pub item_ids: Vec<String>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    /// 1-based position of the first occurrence of `item_id`.
    pub fn position_of(&self, item_id: &str) -> Option<usize> {
        self.item_ids.iter().position(|i| i == item_id).map(|p| p + 1)
    }

    /// Item id at a 1-based product index.
    pub fn item_at(&self, index: usize) -> Option<&str> {
        index
            .checked_sub(1)
            .and_then(|i| self.item_ids.get(i))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtBundle {
    pub items: BTreeSet<String>,
    pub intent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub session_id: String,
    pub bundles: Vec<GtBundle>,
}

impl GroundTruth {
    pub fn item_sets(&self) -> Vec<BTreeSet<String>> {
        self.bundles.iter().map(|b| b.items.clone()).collect()
    }
}

/// A loaded, validated dataset. Sessions keep file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub sessions: Vec<Session>,
    pub catalog: BTreeMap<String, Item>,
    pub ground_truth: BTreeMap<String, GroundTruth>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub sessions: usize,
    pub bundles: usize,
}

impl Dataset {
    pub fn stats(&self) -> DatasetStats {
        let users: HashSet<&str> = self.sessions.iter().map(|s| s.user_id.as_str()).collect();
        DatasetStats {
            users: users.len(),
            items: self.catalog.len(),
            sessions: self.sessions.len(),
            bundles: self.ground_truth.values().map(|g| g.bundles.len()).sum(),
        }
    }

    pub fn session(&self, session_id: &str) -> Option<&Session> {
        self.sessions.iter().find(|s| s.session_id == session_id)
    }

    pub fn title(&self, item_id: &str) -> Option<&str> {
        self.catalog.get(item_id).map(|i| i.raw_title.as_str())
    }

    /// Writes the dataset in the canonical line-delimited format.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for item in self.catalog.values() {
            let rec = Record::Item {
                item_id: item.item_id.clone(),
                title: item.raw_title.clone(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        for s in &self.sessions {
            let bundles = self.ground_truth.get(&s.session_id).map(|gt| {
                gt.bundles
                    .iter()
                    .map(|b| BundleRecord {
                        items: b.items.iter().cloned().collect(),
                        intent: b.intent.clone(),
                    })
                    .collect()
            });
            let rec = Record::Session {
                session_id: s.session_id.clone(),
                user_id: s.user_id.clone(),
                timestamp: s.timestamp,
                items: s.item_ids.clone(),
                bundles,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Record {
    Item {
        item_id: String,
        title: String,
    },
    Session {
        session_id: String,
        user_id: String,
        timestamp: i64,
        items: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bundles: Option<Vec<BundleRecord>>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleRecord {
    items: Vec<String>,
    intent: String,
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let f = fs::File::open(path)?;
    read_dataset(BufReader::new(f))
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset, DatasetError> {
    let mut items: Vec<(usize, String, String)> = Vec::new();
    let mut sessions: Vec<(usize, Record)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        match rec {
            Record::Item { item_id, title } => items.push((line_no, item_id, title)),
            s @ Record::Session { .. } => sessions.push((line_no, s)),
        }
    }

    let mut ds = Dataset::default();
    for (line, item_id, title) in items {
        if title.trim().is_empty() {
            return Err(DatasetError::Invalid {
                line,
                message: format!("item {item_id} has an empty title"),
            });
        }
        if ds.catalog.contains_key(&item_id) {
            return Err(DatasetError::DuplicateItem { line, item_id });
        }
        ds.catalog.insert(
            item_id.clone(),
            Item {
                item_id,
                raw_title: title,
            },
        );
    }

    let mut seen = HashSet::new();
    for (line, rec) in sessions {
        let Record::Session {
            session_id,
            user_id,
            timestamp,
            items,
            bundles,
        } = rec
        else {
            unreachable!()
        };
        if !seen.insert(session_id.clone()) {
            return Err(DatasetError::DuplicateSession { line, session_id });
        }
        if items.is_empty() {
            return Err(DatasetError::Invalid {
                line,
                message: format!("session {session_id} has no items"),
            });
        }
        if let Some(missing) = items.iter().find(|i| !ds.catalog.contains_key(*i)) {
            return Err(DatasetError::DanglingItem {
                line,
                session_id,
                item_id: missing.clone(),
            });
        }
        if let Some(bundles) = bundles {
            let mut gt = Vec::with_capacity(bundles.len());
            for b in bundles {
                let set: BTreeSet<String> = b.items.into_iter().collect();
                if set.len() < 2 {
                    return Err(DatasetError::BundleTooSmall {
                        line,
                        session_id,
                        size: set.len(),
                    });
                }
                if let Some(outside) = set.iter().find(|i| !items.contains(i)) {
                    return Err(DatasetError::BundleOutsideSession {
                        line,
                        session_id,
                        item_id: outside.clone(),
                    });
                }
                if b.intent.trim().is_empty() {
                    return Err(DatasetError::Invalid {
                        line,
                        message: format!("session {session_id} has a bundle with an empty intent"),
                    });
                }
                gt.push(GtBundle {
                    items: set,
                    intent: b.intent,
                });
            }
            ds.ground_truth.insert(
                session_id.clone(),
                GroundTruth {
                    session_id: session_id.clone(),
                    bundles: gt,
                },
            );
        }
        ds.sessions.push(Session {
            session_id,
            user_id,
            timestamp,
            item_ids: items,
        });
    }
    Ok(ds)
}

/// Train / validation / test partition of a dataset's sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<Session>,
    pub validation: Vec<Session>,
    pub test: Vec<Session>,
    pub catalog: BTreeMap<String, Item>,
    pub ground_truth: BTreeMap<String, GroundTruth>,
}

pub const DEFAULT_SPLIT: [f64; 3] = [0.7, 0.1, 0.2];

/// Sizes of the three splits: floors for train and validation, the rest to test.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<(usize, usize, usize), DatasetError> {
    if ratios.iter().any(|r| !(*r > 0.0) || !r.is_finite())
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(DatasetError::BadRatios(ratios));
    }
    if n < 3 {
        return Err(DatasetError::TooFewSessions(n));
    }
    // the epsilon absorbs representation error such as 0.7 * 10 = 6.999..
    let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let train = floor(ratios[0]).min(n);
    let val = floor(ratios[1]).min(n - train);
    Ok((train, val, n - train - val))
}

/// Sorts sessions by `(timestamp, session_id)` and cuts them into three splits.
pub fn chronological_split(
    sessions: &[Session],
    ratios: [f64; 3],
) -> Result<(Vec<Session>, Vec<Session>, Vec<Session>), DatasetError> {
    let (n_train, n_val, _) = split_sizes(sessions.len(), ratios)?;
    let mut sorted = sessions.to_vec();
    sorted.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.session_id.cmp(&b.session_id))
    });
    let test = sorted.split_off(n_train + n_val);
    let val = sorted.split_off(n_train);
    Ok((sorted, val, test))
}

impl Dataset {
    pub fn split(&self, ratios: [f64; 3]) -> Result<SplitDataset, DatasetError> {
        let (train, validation, test) = chronological_split(&self.sessions, ratios)?;
        Ok(SplitDataset {
            train,
            validation,
            test,
            catalog: self.catalog.clone(),
            ground_truth: self.ground_truth.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(id: &str, ts: i64) -> Session {
        Session {
            session_id: id.into(),
            user_id: "u".into(),
            timestamp: ts,
            item_ids: vec!["i1".into()],
        }
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let ds = read_dataset("".as_bytes()).unwrap();
        assert!(ds.sessions.is_empty());
        assert!(ds.catalog.is_empty());
    }

    #[test]
    fn dangling_reference_names_the_id() {
        let text = r#"{"type":"item","item_id":"i1","title":"Tab"}
{"type":"session","session_id":"s1","user_id":"u1","timestamp":1,"items":["i1","i9"]}"#;
        let err = read_dataset(text.as_bytes()).unwrap_err();
        match &err {
            DatasetError::DanglingItem { item_id, line, .. } => {
                assert_eq!(item_id, "i9");
                assert_eq!(*line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("i9"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"type\":\"item\",\"item_id\":\"i1\",\"title\":\"Tab\"}\n\nnot json\n";
        match read_dataset(text.as_bytes()).unwrap_err() {
            DatasetError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singleton_gt_bundle_rejected() {
        let text = r#"{"type":"item","item_id":"i1","title":"Tab"}
{"type":"item","item_id":"i2","title":"Case"}
{"type":"session","session_id":"s1","user_id":"u1","timestamp":1,"items":["i1","i2"],"bundles":[{"items":["i1","i1"],"intent":"x"}]}"#;
        assert!(matches!(
            read_dataset(text.as_bytes()).unwrap_err(),
            DatasetError::BundleTooSmall { size: 1, .. }
        ));
    }

    #[test]
    fn duplicate_session_rejected() {
        let text = r#"{"type":"item","item_id":"i1","title":"Tab"}
{"type":"session","session_id":"s1","user_id":"u1","timestamp":1,"items":["i1"]}
{"type":"session","session_id":"s1","user_id":"u1","timestamp":2,"items":["i1"]}"#;
        assert!(matches!(
            read_dataset(text.as_bytes()).unwrap_err(),
            DatasetError::DuplicateSession { line: 3, .. }
        ));
    }

    #[test]
    fn items_may_follow_sessions() {
        let text = r#"{"type":"session","session_id":"s1","user_id":"u1","timestamp":1,"items":["i1","i2"],"bundles":[{"items":["i1","i2"],"intent":"tablet setup"}]}
{"type":"item","item_id":"i1","title":"Tab"}
{"type":"item","item_id":"i2","title":"Case"}"#;
        let ds = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(ds.stats().bundles, 1);
    }

    #[test]
    fn ten_sessions_split_seven_one_two() {
        let s: Vec<_> = (0..10).map(|i| session(&format!("s{i:02}"), i)).collect();
        let (a, b, c) = chronological_split(&s, DEFAULT_SPLIT).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (7, 1, 2));
    }

    #[test]
    fn three_sessions_floor_rule() {
        let s: Vec<_> = (0..3).map(|i| session(&format!("s{i}"), i)).collect();
        let (a, b, c) = chronological_split(&s, DEFAULT_SPLIT).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (2, 0, 1));
    }

    #[test]
    fn equal_timestamps_fall_back_to_session_id() {
        let s: Vec<_> = ["s3", "s1", "s0", "s2"]
            .iter()
            .map(|id| session(id, 5))
            .collect();
        let (a, b, c) = chronological_split(&s, [0.5, 0.25, 0.25]).unwrap();
        let ids: Vec<_> = a
            .iter()
            .chain(&b)
            .chain(&c)
            .map(|s| s.session_id.as_str())
            .collect();
        assert_eq!(ids, ["s0", "s1", "s2", "s3"]);
    }

    #[test]
    fn split_errors() {
        let s: Vec<_> = (0..2).map(|i| session(&format!("s{i}"), i)).collect();
        assert!(matches!(
            chronological_split(&s, DEFAULT_SPLIT),
            Err(DatasetError::TooFewSessions(2))
        ));
        assert!(matches!(
            split_sizes(10, [0.5, 0.5, 0.5]),
            Err(DatasetError::BadRatios(_))
        ));
        assert!(matches!(
            split_sizes(10, [0.8, 0.0, 0.2]),
            Err(DatasetError::BadRatios(_))
        ));
    }
}
