//! Blinded intent samples for human raters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{is_hit, EvalError};
use crate::dataset::Dataset;
use crate::infer::SessionResult;

/// A hit bundle whose generated intent can be compared with the GT intent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentCandidate {
    pub session_id: String,
    pub label: u32,
    pub products: Vec<String>,
    pub generated: String,
    pub ground_truth: String,
}

/// Hit bundles with an intent, in session then label order.
pub fn hit_candidates(results: &[SessionResult], dataset: &Dataset) -> Vec<IntentCandidate> {
    let mut out = Vec::new();
    for r in results.iter().filter(|r| !r.failed) {
        let Some(gt) = dataset.ground_truth.get(&r.session_id) else {
            continue;
        };
        let sets = gt.item_sets();
        for b in &r.bundles {
            let (Some(g), Some(intent)) = (is_hit(&b.items, &sets), &b.intent) else {
                continue;
            };
            out.push(IntentCandidate {
                session_id: r.session_id.clone(),
                label: b.label,
                products: b
                    .items
                    .iter()
                    .map(|id| dataset.title(id).unwrap_or(id).to_owned())
                    .collect(),
                generated: intent.clone(),
                ground_truth: gt.bundles[g].intent.clone(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub records: usize,
    pub rater_files: Vec<PathBuf>,
    pub answer_key: PathBuf,
}

#[derive(Serialize)]
struct RaterRow<'a> {
    record: String,
    domain: &'a str,
    products: String,
    intent_a: &'a str,
    intent_b: &'a str,
    naturalness_a: &'a str,
    coverage_a: &'a str,
    motivation_a: &'a str,
    naturalness_b: &'a str,
    coverage_b: &'a str,
    motivation_b: &'a str,
}

#[derive(Serialize)]
struct KeyRow<'a> {
    record: String,
    domain: &'a str,
    session_id: &'a str,
    label: u32,
    intent_a_source: &'a str,
    intent_b_source: &'a str,
}

fn tsv(path: &Path) -> Result<csv::Writer<std::fs::File>, EvalError> {
    Ok(csv::WriterBuilder::new().delimiter(b'\t').from_path(path)?)
}

/// Sample `n_per_domain` candidates per domain and write one TSV per rater
/// plus `answer_key.tsv` into `out_dir`. Each record shows the two intents
/// in a random order; only the key says which one was generated.
pub fn export_human_eval(
    domains: &BTreeMap<String, Vec<IntentCandidate>>,
    n_per_domain: usize,
    raters: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<ExportSummary, EvalError> {
    for (domain, cands) in domains {
        if cands.len() < n_per_domain {
            return Err(EvalError::InsufficientHits {
                domain: domain.clone(),
                needed: n_per_domain,
                available: cands.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (record id, domain, candidate, generated shown first)
    let mut records = Vec::new();
    for (domain, cands) in domains {
        let mut picked = sample(&mut rng, cands.len(), n_per_domain).into_vec();
        picked.sort_unstable();
        for i in picked {
            let id = format!("r{:04}", records.len() + 1);
            records.push((id, domain.as_str(), &cands[i], rng.gen_bool(0.5)));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let mut rater_files = Vec::new();
    for r in 1..=raters {
        let path = out_dir.join(format!("rater_{r}.tsv"));
        let mut w = tsv(&path)?;
        let mut order: Vec<usize> = (0..records.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for i in order {
            let (id, domain, c, generated_first) = &records[i];
            let (a, b) = if *generated_first {
                (&c.generated, &c.ground_truth)
            } else {
                (&c.ground_truth, &c.generated)
            };
            w.serialize(RaterRow {
                record: id.clone(),
                domain,
                products: c.products.join(" | "),
                intent_a: a,
                intent_b: b,
                naturalness_a: "",
                coverage_a: "",
                motivation_a: "",
                naturalness_b: "",
                coverage_b: "",
                motivation_b: "",
            })?;
        }
        w.flush()?;
        rater_files.push(path);
    }
    let answer_key = out_dir.join("answer_key.tsv");
    let mut w = tsv(&answer_key)?;
    for (id, domain, c, generated_first) in &records {
        let (a, b) = if *generated_first {
            ("generated", "ground_truth")
        } else {
            ("ground_truth", "generated")
        };
        w.serialize(KeyRow {
            record: id.clone(),
            domain,
            session_id: &c.session_id,
            label: c.label,
            intent_a_source: a,
            intent_b_source: b,
        })?;
    }
    w.flush()?;
    Ok(ExportSummary {
        records: records.len(),
        rater_files,
        answer_key,
    })
}
