use serde::{Deserialize, Serialize};

use crate::llm::{ChatClient, Conversation};
use crate::parse::{parse_rating_answer, BundleLabel, Metric, RatingTriple};
use crate::prompts::{PromptRegistry, TemplateId};

use super::{DemoError, IntentSignal, RATE_TAG};

/// Averaged scores one rater gave the candidate and the GT intent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterScores {
    pub rater: String,
    pub candidate: RatingTriple,
    pub ground_truth: RatingTriple,
    /// Repetitions whose answer could be read.
    pub parsed: u32,
}

impl RaterScores {
    /// Metrics where the candidate scored strictly below the GT intent.
    pub fn lower_metrics(&self) -> Vec<Metric> {
        Metric::ALL
            .into_iter()
            .filter(|&m| self.candidate.get(m) < self.ground_truth.get(m))
            .collect()
    }
}

/// Independent LLM raters, each asked `repetitions` times per comparison.
#[derive(Clone)]
pub struct RaterPanel {
    raters: Vec<ChatClient>,
    repetitions: u32,
}

impl RaterPanel {
    pub fn new(first: ChatClient, second: ChatClient) -> Self {
        if first.provider_id() == second.provider_id() {
            log::warn!(
                "both raters use provider {}; ratings will not be independent",
                first.provider_id()
            );
        }
        Self {
            raters: vec![first, second],
            repetitions: 3,
        }
    }

    pub fn with_repetitions(mut self, repetitions: u32) -> Self {
        self.repetitions = repetitions.max(1);
        self
    }

    pub fn repetitions(&self) -> u32 {
        self.repetitions
    }

    pub fn rater_ids(&self) -> Vec<String> {
        self.raters.iter().map(ChatClient::provider_id).collect()
    }

    /// Ask every rater to compare `candidate` (intent 1) with `ground_truth`
    /// (intent 2) for the bundle made of `products`.
    pub fn rate_intent(
        &self,
        prompts: &PromptRegistry,
        subject: &str,
        label: BundleLabel,
        products: &[(usize, &str)],
        candidate: &str,
        ground_truth: &str,
    ) -> Result<Vec<RaterScores>, DemoError> {
        let prompt = prompts.rater(products, candidate, ground_truth)?;
        let system = prompts.fixed(TemplateId::System);
        let reminder = prompts.fixed(TemplateId::FormatReminder);
        let mut out = Vec::with_capacity(self.raters.len());
        for rater in &self.raters {
            let mut cands = Vec::new();
            let mut gts = Vec::new();
            for rep in 0..self.repetitions {
                let mut conv = Conversation::new(Some(subject), Some(&system));
                let reply = rater.send_repeat(&mut conv, &prompt, RATE_TAG, rep)?;
                let pair = match read_pair(&reply) {
                    Some(p) => Some(p),
                    None => {
                        let tag = format!("format_reminder:{RATE_TAG}");
                        let reply = rater.send_repeat(&mut conv, &reminder, &tag, rep)?;
                        read_pair(&reply)
                    }
                };
                if let Some((c, g)) = pair {
                    cands.push(c);
                    gts.push(g);
                }
            }
            // a strict majority of repetitions must be readable
            let parsed = cands.len() as u32;
            if parsed < self.repetitions / 2 + 1 {
                return Err(DemoError::Rating {
                    label,
                    rater: rater.provider_id(),
                    parsed,
                    repetitions: self.repetitions,
                });
            }
            out.push(RaterScores {
                rater: rater.provider_id(),
                candidate: RatingTriple::mean(&cands).expect("non-empty"),
                ground_truth: RatingTriple::mean(&gts).expect("non-empty"),
                parsed,
            });
        }
        Ok(out)
    }
}

fn read_pair(reply: &str) -> Option<(RatingTriple, RatingTriple)> {
    let parsed = parse_rating_answer(reply).ok()?.value;
    Some((*parsed.get(&1)?, *parsed.get(&2)?))
}

/// Per-metric signals for one bundle; a metric is flagged when any rater
/// scored the candidate lower.
pub fn intent_signals(label: BundleLabel, scores: &[RaterScores]) -> Vec<IntentSignal> {
    let mut metrics: Vec<Metric> = scores.iter().flat_map(RaterScores::lower_metrics).collect();
    metrics.sort();
    metrics.dedup();
    metrics
        .into_iter()
        .map(|metric| IntentSignal { label, metric })
        .collect()
}
