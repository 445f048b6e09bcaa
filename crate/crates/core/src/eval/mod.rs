//! Precision, recall and coverage over hit bundles.
//!
//! A predicted bundle is a hit when it has at least two items and is a
//! subset of some ground-truth bundle. Per session, precision is
//! hits / predicted and recall is hits / ground truth; both are averaged
//! over sessions. Coverage is |hit| / |matched GT| averaged over every hit
//! bundle in the run. All sums are kept as exact fractions; the `f64`
//! fields are conversions of those.

pub mod export;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use num::{BigInt, BigRational, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dataset::GroundTruth;
use crate::infer::SessionResult;

pub use self::export::{export_human_eval, hit_candidates, ExportSummary, IntentCandidate};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no result for test session {0}")]
    MissingResult(String),
    #[error("bundle is not contained in its matched ground truth bundle")]
    NotASubset,
    #[error("domain {domain}: need {needed} hit bundles with intents, found {available} (short by {})", needed - available)]
    InsufficientHits {
        domain: String,
        needed: usize,
        available: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("report file: {0}")]
    Json(#[from] serde_json::Error),
}

/// How hits are counted in the precision/recall numerator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitCounting {
    /// Every predicted hit counts, even when several hit one GT bundle.
    /// The recall numerator is capped at the number of GT bundles.
    #[default]
    Literal,
    /// Hits count once per distinct matched GT bundle.
    DistinctGt,
}

fn ratio(n: usize, d: usize) -> BigRational {
    if d == 0 {
        BigRational::zero()
    } else {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// |a ∩ b| / |a ∪ b| exactly; 0 when both are empty.
pub fn jaccard_exact<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> BigRational {
    let inter = a.intersection(b).count();
    ratio(inter, a.len() + b.len() - inter)
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    to_f64(&jaccard_exact(a, b))
}

/// Index of the GT bundle a hit is matched to, or `None` for a non-hit.
/// Among supersets the highest Jaccard wins, then the smaller bundle, then
/// the earlier one.
pub fn is_hit<T: Ord>(pred: &BTreeSet<T>, gts: &[BTreeSet<T>]) -> Option<usize> {
    if pred.len() < 2 {
        return None;
    }
    let mut best: Option<(usize, BigRational)> = None;
    for (i, g) in gts.iter().enumerate() {
        if !pred.is_subset(g) {
            continue;
        }
        let j = jaccard_exact(pred, g);
        let better = match &best {
            None => true,
            Some((b, bj)) => j > *bj || (j == *bj && g.len() < gts[*b].len()),
        };
        if better {
            best = Some((i, j));
        }
    }
    best.map(|(i, _)| i)
}

/// |hit| / |matched GT|.
pub fn bundle_coverage<T: Ord>(hit: &BTreeSet<T>, matched: &BTreeSet<T>) -> Result<BigRational, EvalError> {
    if !hit.is_subset(matched) || matched.is_empty() {
        return Err(EvalError::NotASubset);
    }
    Ok(ratio(hit.len(), matched.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub session_id: String,
    pub predicted: usize,
    pub ground_truth: usize,
    pub hits: usize,
    pub precision: f64,
    /// `None` when the session has no ground truth bundles.
    pub recall: Option<f64>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitBundle {
    pub session_id: String,
    /// Position of the bundle in the session's predictions.
    pub index: usize,
    pub items: BTreeSet<String>,
    pub matched_gt: usize,
    pub coverage: String,
}

/// Predictions and ground truth for one test session.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSession {
    pub session_id: String,
    pub predictions: Vec<BTreeSet<String>>,
    pub ground_truth: Vec<BTreeSet<String>>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub counting: HitCounting,
    pub sessions: usize,
    pub recall_sessions: usize,
    pub failed_sessions: usize,
    pub predicted_bundles: usize,
    pub ground_truth_bundles: usize,
    pub hit_bundles: usize,
    pub precision: f64,
    pub recall: f64,
    pub coverage: f64,
    /// The three metrics as exact fractions, e.g. "5/6".
    pub exact: BTreeMap<String, String>,
    pub per_session: Vec<SessionMetrics>,
    pub hits: Vec<HitBundle>,
}

/// Exact metric values, kept for comparisons that must not round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactMetrics {
    pub precision: BigRational,
    pub recall: BigRational,
    pub coverage: BigRational,
}

pub fn evaluate(sessions: &[EvalSession], counting: HitCounting) -> (EvalReport, ExactMetrics) {
    let mut precision_sum = BigRational::zero();
    let mut recall_sum = BigRational::zero();
    let mut coverage_sum = BigRational::zero();
    let mut recall_sessions = 0;
    let mut per_session = Vec::with_capacity(sessions.len());
    let mut hits_out = Vec::new();
    for s in sessions {
        let mut matched_gts = BTreeSet::new();
        let mut hits = 0;
        for (idx, p) in s.predictions.iter().enumerate() {
            if let Some(g) = is_hit(p, &s.ground_truth) {
                hits += 1;
                matched_gts.insert(g);
                let c = bundle_coverage(p, &s.ground_truth[g]).expect("hit is a subset");
                hits_out.push(HitBundle {
                    session_id: s.session_id.clone(),
                    index: idx,
                    items: p.clone(),
                    matched_gt: g,
                    coverage: c.to_string(),
                });
                coverage_sum += c;
            }
        }
        let counted = match counting {
            HitCounting::Literal => hits,
            HitCounting::DistinctGt => matched_gts.len(),
        };
        let p = ratio(counted, s.predictions.len());
        precision_sum += &p;
        let r = if s.ground_truth.is_empty() {
            None
        } else {
            recall_sessions += 1;
            let r = ratio(counted.min(s.ground_truth.len()), s.ground_truth.len());
            recall_sum += &r;
            Some(r)
        };
        per_session.push(SessionMetrics {
            session_id: s.session_id.clone(),
            predicted: s.predictions.len(),
            ground_truth: s.ground_truth.len(),
            hits: counted,
            precision: to_f64(&p),
            recall: r.as_ref().map(to_f64),
            failed: s.failed,
        });
    }
    let exact = ExactMetrics {
        precision: precision_sum / ratio_den(sessions.len()),
        recall: recall_sum / ratio_den(recall_sessions),
        coverage: coverage_sum / ratio_den(hits_out.len()),
    };
    let report = EvalReport {
        counting,
        sessions: sessions.len(),
        recall_sessions,
        failed_sessions: sessions.iter().filter(|s| s.failed).count(),
        predicted_bundles: sessions.iter().map(|s| s.predictions.len()).sum(),
        ground_truth_bundles: sessions.iter().map(|s| s.ground_truth.len()).sum(),
        hit_bundles: hits_out.len(),
        precision: to_f64(&exact.precision),
        recall: to_f64(&exact.recall),
        coverage: to_f64(&exact.coverage),
        exact: BTreeMap::from([
            ("precision".to_owned(), exact.precision.to_string()),
            ("recall".to_owned(), exact.recall.to_string()),
            ("coverage".to_owned(), exact.coverage.to_string()),
        ]),
        per_session,
        hits: hits_out,
    };
    (report, exact)
}

// Divisor for an average; an empty average is 0, so dividing by 1 is fine.
fn ratio_den(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n.max(1)))
}

/// Pair each test session with its result and ground truth. Sessions
/// without ground truth take part with no GT bundles.
pub fn eval_sessions(
    test_ids: &[String],
    results: &BTreeMap<String, SessionResult>,
    ground_truth: &BTreeMap<String, GroundTruth>,
) -> Result<Vec<EvalSession>, EvalError> {
    test_ids
        .iter()
        .map(|id| {
            let r = results
                .get(id)
                .ok_or_else(|| EvalError::MissingResult(id.clone()))?;
            Ok(EvalSession {
                session_id: id.clone(),
                predictions: if r.failed { Vec::new() } else { r.item_sets() },
                ground_truth: ground_truth.get(id).map(GroundTruth::item_sets).unwrap_or_default(),
                failed: r.failed,
            })
        })
        .collect()
}

impl EvalReport {
    pub fn save(&self, dir: &Path) -> Result<(), EvalError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        std::fs::write(dir.join("report.txt"), self.to_table())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(
            dir.join("report.json"),
        )?)?)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "metric     value    exact");
        for (name, v) in [
            ("precision", self.precision),
            ("recall", self.recall),
            ("coverage", self.coverage),
        ] {
            let _ = writeln!(out, "{name:<10} {v:<8.4} {}", self.exact[name]);
        }
        let _ = writeln!(
            out,
            "\nsessions {} (recall over {}, failed {}), predicted {}, ground truth {}, hits {}",
            self.sessions,
            self.recall_sessions,
            self.failed_sessions,
            self.predicted_bundles,
            self.ground_truth_bundles,
            self.hit_bundles
        );
        out
    }
}

/// One row per run, for comparing runs side by side.
pub fn comparison_table(runs: &[(String, EvalReport)]) -> String {
    let width = runs.iter().map(|(n, _)| n.len()).max().unwrap_or(3).max(3);
    let mut out = format!("{:<width$}  precision  recall  coverage  sessions\n", "run");
    for (name, r) in runs {
        let _ = writeln!(
            out,
            "{name:<width$}  {:<9.4}  {:<6.4}  {:<8.4}  {}",
            r.precision, r.recall, r.coverage, r.sessions
        );
    }
    out
}
