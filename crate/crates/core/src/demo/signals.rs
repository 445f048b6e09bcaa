//! Bundle matching and supervision signals.
//!
//! Bundles here are sets of 1-based product positions within one session.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::parse::{BundleLabel, BundleMap, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BundleSignalType {
    Keep,
    Invalid,
    RemoveUnrelated,
    AppendRelated,
    ExpandSingleton,
}

impl BundleSignalType {
    pub const ALL: [BundleSignalType; 5] = [
        BundleSignalType::Keep,
        BundleSignalType::Invalid,
        BundleSignalType::RemoveUnrelated,
        BundleSignalType::AppendRelated,
        BundleSignalType::ExpandSingleton,
    ];

    pub fn number(self) -> u8 {
        match self {
            BundleSignalType::Keep => 1,
            BundleSignalType::Invalid => 2,
            BundleSignalType::RemoveUnrelated => 3,
            BundleSignalType::AppendRelated => 4,
            BundleSignalType::ExpandSingleton => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSignal {
    pub label: BundleLabel,
    pub signal_type: BundleSignalType,
    /// Index into the ground-truth list the bundle was compared against.
    pub matched_gt: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntentSignal {
    pub label: BundleLabel,
    pub metric: Metric,
}

/// Jaccard similarity as an exact fraction `(|a ∩ b|, |a ∪ b|)`.
pub fn jaccard_ratio(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> (usize, usize) {
    let inter = a.intersection(b).count();
    (inter, a.len() + b.len() - inter)
}

fn cmp_ratio(x: (usize, usize), y: (usize, usize)) -> Ordering {
    // x.0 / x.1 vs y.0 / y.1, with 0/0 treated as 0
    let lhs = x.0 * y.1.max(1);
    let rhs = y.0 * x.1.max(1);
    lhs.cmp(&rhs)
}

/// One-to-one partial matching of predicted bundles to GT indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(BundleLabel, usize)>,
}

impl Matching {
    pub fn gt_of(&self, label: BundleLabel) -> Option<usize> {
        self.pairs.iter().find(|(l, _)| *l == label).map(|(_, g)| *g)
    }
}

/// Greedy global matching: repeatedly take the unmatched pair with the
/// highest positive Jaccard; ties go to the lower label, then lower GT index.
pub fn match_bundles(pred: &BundleMap, gt: &[BTreeSet<usize>]) -> Matching {
    let mut candidates: Vec<(BundleLabel, usize, (usize, usize))> = Vec::new();
    for (&label, items) in pred.iter() {
        for (g, gset) in gt.iter().enumerate() {
            let r = jaccard_ratio(items, gset);
            if r.0 > 0 {
                candidates.push((label, g, r));
            }
        }
    }
    candidates.sort_by(|a, b| {
        cmp_ratio(b.2, a.2)
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut used_pred = BTreeSet::new();
    let mut used_gt = BTreeSet::new();
    let mut pairs = Vec::new();
    for (label, g, _) in candidates {
        if used_pred.contains(&label) || used_gt.contains(&g) {
            continue;
        }
        used_pred.insert(label);
        used_gt.insert(g);
        pairs.push((label, g));
    }
    pairs.sort();
    Matching { pairs }
}

/// Signal type of one predicted bundle against the GT bundle it is
/// compared with (`None` when it shares no item with any GT bundle).
pub fn classify_bundle_signal(
    pred: &BTreeSet<usize>,
    matched: Option<&BTreeSet<usize>>,
) -> BundleSignalType {
    let Some(g) = matched else {
        return BundleSignalType::Invalid;
    };
    if pred.is_disjoint(g) {
        BundleSignalType::Invalid
    } else if pred == g {
        BundleSignalType::Keep
    } else if !pred.is_subset(g) {
        BundleSignalType::RemoveUnrelated
    } else if pred.len() > 1 {
        BundleSignalType::AppendRelated
    } else {
        BundleSignalType::ExpandSingleton
    }
}

/// GT index with the highest Jaccard against `pred`, lowest index on ties;
/// `None` when nothing overlaps.
fn best_overlap(pred: &BTreeSet<usize>, gt: &[BTreeSet<usize>]) -> Option<usize> {
    let mut best: Option<(usize, (usize, usize))> = None;
    for (g, gset) in gt.iter().enumerate() {
        let r = jaccard_ratio(pred, gset);
        if r.0 == 0 {
            continue;
        }
        if best.map_or(true, |(_, b)| cmp_ratio(r, b) == Ordering::Greater) {
            best = Some((g, r));
        }
    }
    best.map(|(g, _)| g)
}

/// Signals for every predicted bundle, in label order.
///
/// Bundles left out of the one-to-one matching but still overlapping some
/// GT bundle are compared with their best-overlapping GT bundle. The one
/// exception is an unmatched exact copy of an already matched GT bundle:
/// it is a duplicate and gets `Invalid`.
pub fn bundle_signals(pred: &BundleMap, gt: &[BTreeSet<usize>]) -> Vec<BundleSignal> {
    let matching = match_bundles(pred, gt);
    pred.iter()
        .map(|(&label, items)| {
            if let Some(g) = matching.gt_of(label) {
                return BundleSignal {
                    label,
                    signal_type: classify_bundle_signal(items, Some(&gt[g])),
                    matched_gt: Some(g),
                };
            }
            let g = best_overlap(items, gt);
            let signal_type = match g {
                Some(i) if gt[i] == *items => BundleSignalType::Invalid,
                _ => classify_bundle_signal(items, g.map(|i| &gt[i])),
            };
            BundleSignal {
                label,
                signal_type,
                matched_gt: g,
            }
        })
        .collect()
}

/// True when there is at least one bundle and every signal is Keep.
pub fn all_keep(signals: &[BundleSignal]) -> bool {
    !signals.is_empty()
        && signals
            .iter()
            .all(|s| s.signal_type == BundleSignalType::Keep)
}

pub const NO_BUNDLES_TIP: &str = "no bundles were detected in your answer";

/// `bundle 1 is Type 3; bundle 2 is Type 1`.
pub fn bundle_tips(signals: &[BundleSignal]) -> String {
    if signals.is_empty() {
        return NO_BUNDLES_TIP.to_owned();
    }
    signals
        .iter()
        .map(|s| format!("bundle {} is Type {}", s.label, s.signal_type.number()))
        .collect::<Vec<_>>()
        .join("; ")
}

/// `regenerate intent 1 to [Type 2, Type 3]`, one clause per bundle.
pub fn intent_tips(signals: &[IntentSignal]) -> String {
    let mut by_label: std::collections::BTreeMap<BundleLabel, BTreeSet<Metric>> =
        Default::default();
    for s in signals {
        by_label.entry(s.label).or_default().insert(s.metric);
    }
    by_label
        .iter()
        .map(|(l, ms)| {
            let types: Vec<String> = ms
                .iter()
                .map(|m| format!("Type {}", m.signal_type()))
                .collect();
            format!("regenerate intent {l} to [{}]", types.join(", "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}
