//! Demonstration-guided inference on target sessions.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{GroundTruth, Session};
use crate::demo::{
    ask, bundle_parser, gt_positions, intent_parser, DemoError, Demonstration,
    BUNDLE_FEEDBACK_PREFIX, FORMAT_REMINDER_PREFIX, INTENT_FEEDBACK_PREFIX, TAG_INITIAL_BUNDLES,
    TAG_INITIAL_INTENTS, TAG_REINFER_INTENTS, TAG_RULES, TAG_SELF_CORRECT_BUNDLES,
    TAG_SELF_CORRECT_INTENTS,
};
use crate::llm::{ChatClient, Conversation, LlmError, Turn};
use crate::parse::{BundleLabel, BundleMap, IntentMap};
use crate::prompts::{PromptError, PromptRegistry, TemplateId};

pub const TAG_TARGET_BUNDLES: &str = "target_bundles";
pub const TAG_TARGET_INTENTS: &str = "target_intents";

/// Intent length the prompts ask for, in words.
pub const INTENT_WORDS: std::ops::RangeInclusive<usize> = 3..=5;

#[derive(Debug, thiserror::Error)]
pub enum InferError {
    #[error("{0:?} inference needs at least one demonstration")]
    NoDemonstrations(InferenceMode),
    #[error("target session {0} is empty")]
    EmptySession(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("result file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    Dicl,
    FewShotRandom,
    ZeroShot,
}

impl std::str::FromStr for InferenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "dicl" => Ok(Self::Dicl),
            "few_shot" | "few_shot_random" => Ok(Self::FewShotRandom),
            "zero_shot" => Ok(Self::ZeroShot),
            other => Err(format!("unknown mode {other:?} (dicl, few-shot, zero-shot)")),
        }
    }
}

/// Which parts of a demonstration reach the target conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub use_self_correct: bool,
    pub use_auto_feedback: bool,
    pub use_rules: bool,
    pub use_intents_in_demo: bool,
    /// When false a random training session replaces the nearest neighbor.
    pub use_top_neighbor: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            use_self_correct: true,
            use_auto_feedback: true,
            use_rules: true,
            use_intents_in_demo: true,
            use_top_neighbor: true,
        }
    }
}

impl Ablation {
    /// Whether a demonstration turn with step tag `tag` is kept.
    pub fn keeps(&self, tag: &str) -> bool {
        let tag = tag.strip_prefix(FORMAT_REMINDER_PREFIX).unwrap_or(tag);
        let intent_step = matches!(
            tag,
            TAG_INITIAL_INTENTS | TAG_SELF_CORRECT_INTENTS | TAG_REINFER_INTENTS
        ) || tag.starts_with(INTENT_FEEDBACK_PREFIX);
        if intent_step && !self.use_intents_in_demo {
            return false;
        }
        if matches!(tag, TAG_SELF_CORRECT_BUNDLES | TAG_SELF_CORRECT_INTENTS) {
            return self.use_self_correct;
        }
        if tag == TAG_REINFER_INTENTS
            || tag.starts_with(BUNDLE_FEEDBACK_PREFIX)
            || tag.starts_with(INTENT_FEEDBACK_PREFIX)
        {
            return self.use_auto_feedback;
        }
        if tag == TAG_RULES {
            return self.use_rules;
        }
        true
    }
}

/// Context for one target: demonstrations in rank order, already filtered.
pub fn assemble_context(
    demonstrations: &[&Demonstration],
    mode: InferenceMode,
    ablation: &Ablation,
    prompts: &PromptRegistry,
) -> Result<Conversation, InferError> {
    let system = prompts.fixed(TemplateId::System);
    let mut conv = Conversation::new(None, Some(&system));
    match mode {
        InferenceMode::ZeroShot => {}
        InferenceMode::Dicl => {
            if demonstrations.is_empty() {
                return Err(InferError::NoDemonstrations(mode));
            }
            for d in demonstrations {
                conv.turns.extend(
                    d.conversation
                        .turns
                        .iter()
                        .filter(|t| ablation.keeps(&t.tag))
                        .cloned(),
                );
            }
        }
        InferenceMode::FewShotRandom => {
            if demonstrations.is_empty() {
                return Err(InferError::NoDemonstrations(mode));
            }
            for d in demonstrations {
                conv.turns.extend(d.conversation.turns.iter().cloned());
            }
        }
    }
    Ok(conv)
}

/// A transcript that answers the two initial prompts with the ground truth,
/// used as the few-shot example.
pub fn ideal_transcript(
    session: &Session,
    titles: &[String],
    gt: &GroundTruth,
    prompts: &PromptRegistry,
) -> Result<Demonstration, InferError> {
    let positions = gt_positions(session, gt)?;
    let mut bundles = BundleMap::new();
    let mut intents = IntentMap::new();
    for (i, (set, intent)) in positions.into_iter().enumerate() {
        let label = i as BundleLabel + 1;
        bundles.insert(label, set);
        intents.insert(label, intent);
    }
    let system = prompts.fixed(TemplateId::System);
    let mut conversation = Conversation::new(Some(&session.session_id), Some(&system));
    conversation.push_turn(
        TAG_INITIAL_BUNDLES,
        &prompts.initial_bundles(titles)?,
        &bundles.to_answer(),
    );
    conversation.push_turn(
        TAG_INITIAL_INTENTS,
        &prompts.fixed(TemplateId::InitialIntents),
        &intents.to_answer(),
    );
    Ok(Demonstration {
        session_id: session.session_id.clone(),
        conversation,
        bundles,
        intents,
        rules: String::new(),
        loops: Default::default(),
        rounds: Default::default(),
        unresolved_bundle_signals: Vec::new(),
        unresolved_intent_signals: Vec::new(),
        ratings: Vec::new(),
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedBundle {
    pub label: BundleLabel,
    pub items: BTreeSet<String>,
    pub positions: BTreeSet<usize>,
    pub intent: Option<String>,
    /// Single-product bundles never count as hits.
    pub singleton: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResult {
    pub session_id: String,
    pub mode: InferenceMode,
    pub bundles: Vec<PredictedBundle>,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Sessions whose demonstrations formed the context, in order.
    pub demonstrations: Vec<String>,
    /// The turns added for the target itself.
    pub turns: Vec<Turn>,
    pub warnings: Vec<String>,
}

impl SessionResult {
    pub fn item_sets(&self) -> Vec<BTreeSet<String>> {
        self.bundles.iter().map(|b| b.items.clone()).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), InferError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, InferError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Run the bundle and intent prompts for `target` after `context`.
///
/// Unreadable answers mark the result failed with no predictions; provider
/// errors are returned.
#[allow(clippy::too_many_arguments)]
pub fn infer_target(
    target: &Session,
    titles: &[String],
    context: &Conversation,
    demonstrations: Vec<String>,
    mode: InferenceMode,
    client: &ChatClient,
    prompts: &PromptRegistry,
) -> Result<SessionResult, InferError> {
    if target.is_empty() {
        return Err(InferError::EmptySession(target.session_id.clone()));
    }
    let mut conv = context.clone();
    conv.subject = Some(target.session_id.clone());
    let prefix = conv.turns.len();
    let mut warnings = Vec::new();
    let mut result = SessionResult {
        session_id: target.session_id.clone(),
        mode,
        bundles: Vec::new(),
        failed: false,
        failure: None,
        demonstrations,
        turns: Vec::new(),
        warnings: Vec::new(),
    };

    let prompt = match mode {
        InferenceMode::Dicl => prompts.target_inference(titles)?,
        _ => prompts.initial_bundles(titles)?,
    };
    let bundles = ask(
        client,
        &mut conv,
        prompts,
        &prompt,
        TAG_TARGET_BUNDLES,
        &mut warnings,
        bundle_parser(target.len()),
    );
    let intent_prompt = prompts.fixed(TemplateId::InitialIntents);
    let intents = ask(
        client,
        &mut conv,
        prompts,
        &intent_prompt,
        TAG_TARGET_INTENTS,
        &mut warnings,
        intent_parser,
    );
    result.turns = conv.turns[prefix..].to_vec();

    let (bundles, intents) = match (bundles, intents) {
        (Ok(b), Ok(i)) => (b, i),
        // the intent reply is irrelevant without bundles
        (Ok(b), Err(DemoError::Parse { .. })) if b.is_empty() => (b, IntentMap::new()),
        (Err(e), _) | (_, Err(e)) => {
            let e = match e {
                DemoError::Parse { .. } => e,
                other => return Err(other.into()),
            };
            log::warn!("session {}: {e}", target.session_id);
            result.failed = true;
            result.failure = Some(e.to_string());
            result.warnings = warnings;
            return Ok(result);
        }
    };

    for (&label, positions) in bundles.iter() {
        let items: BTreeSet<String> = positions
            .iter()
            .filter_map(|&p| target.item_at(p).map(str::to_owned))
            .collect();
        let intent = intents.get(label).map(str::to_owned);
        match &intent {
            None => warnings.push(format!("bundle {label} has no intent")),
            Some(t) if !INTENT_WORDS.contains(&t.split_whitespace().count()) => warnings.push(
                format!("intent {label} has {} words", t.split_whitespace().count()),
            ),
            _ => {}
        }
        if positions.len() == 1 {
            warnings.push(format!("bundle {label} is a single product"));
        }
        result.bundles.push(PredictedBundle {
            label,
            singleton: positions.len() == 1,
            items,
            positions: positions.clone(),
            intent,
        });
    }
    result.warnings = warnings;
    Ok(result)
}
