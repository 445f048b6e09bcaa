//! Demonstration generation on a labelled neighbor session.
//!
//! Initial bundles and intents, mutual self-correction, bundle feedback
//! against the ground truth, intent re-inference, rater-driven intent
//! feedback, and finally a rules summary. Everything the model saw and said
//! is kept in the demonstration's conversation.

mod rater;
mod signals;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{GroundTruth, Session};
use crate::llm::{ChatClient, Conversation, LlmError};
use crate::parse::{
    parse_bundle_answer, parse_intent_answer, BundleLabel, BundleMap, IntentMap, ParseError,
};
use crate::prompts::{PromptError, PromptRegistry, TemplateId};

pub use self::rater::{intent_signals, RaterPanel, RaterScores};
pub use self::signals::{
    all_keep, bundle_signals, bundle_tips, classify_bundle_signal, intent_tips, jaccard_ratio,
    match_bundles, BundleSignal, BundleSignalType, IntentSignal, Matching, NO_BUNDLES_TIP,
};

pub const TAG_INITIAL_BUNDLES: &str = "initial_bundles";
pub const TAG_INITIAL_INTENTS: &str = "initial_intents";
pub const TAG_SELF_CORRECT_BUNDLES: &str = "self_correct_bundles";
pub const TAG_SELF_CORRECT_INTENTS: &str = "self_correct_intents";
pub const TAG_REINFER_INTENTS: &str = "reinfer_intents";
pub const TAG_RULES: &str = "rules";
pub const RATE_TAG: &str = "rate_intent";
pub const BUNDLE_FEEDBACK_PREFIX: &str = "bundle_feedback_round_";
pub const INTENT_FEEDBACK_PREFIX: &str = "intent_feedback_round_";
pub const FORMAT_REMINDER_PREFIX: &str = "format_reminder:";

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("session {0} has no ground truth bundles")]
    NoGroundTruth(String),
    #[error("session {0} is empty")]
    EmptySession(String),
    #[error("ground truth item {item} is not in session {session}")]
    GtOutsideSession { session: String, item: String },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("step {tag}: unreadable answer after a format reminder: {source}")]
    Parse { tag: String, source: ParseError },
    #[error("intent {label}: rater {rater} gave {parsed} readable ratings out of {repetitions}")]
    Rating {
        label: BundleLabel,
        rater: String,
        parsed: u32,
        repetitions: u32,
    },
    #[error("rules summary was empty after a retry")]
    EmptyRules,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("demonstration file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Round budgets for the three loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub self_correct: u32,
    pub bundle_feedback: u32,
    pub intent_feedback: u32,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            self_correct: 1,
            bundle_feedback: 4,
            intent_feedback: 1,
        }
    }
}

impl LoopConfig {
    pub fn new(self_correct: u32, bundle_feedback: u32, intent_feedback: u32) -> Self {
        Self {
            self_correct,
            bundle_feedback,
            intent_feedback,
        }
    }
}

/// Prompts actually sent in each loop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundCounts {
    pub self_correct: u32,
    pub bundle_feedback: u32,
    pub intent_feedback: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    /// 0 for the rating before the first feedback prompt.
    pub round: u32,
    pub label: BundleLabel,
    pub scores: Vec<RaterScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub session_id: String,
    pub conversation: Conversation,
    pub bundles: BundleMap,
    pub intents: IntentMap,
    pub rules: String,
    pub loops: LoopConfig,
    pub rounds: RoundCounts,
    pub unresolved_bundle_signals: Vec<BundleSignal>,
    pub unresolved_intent_signals: Vec<IntentSignal>,
    pub ratings: Vec<RatingRecord>,
    pub warnings: Vec<String>,
}

impl Demonstration {
    pub fn save(&self, path: &Path) -> Result<(), DemoError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DemoError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// GT bundles of `session` as product-position sets, with their intents.
pub fn gt_positions(
    session: &Session,
    gt: &GroundTruth,
) -> Result<Vec<(BTreeSet<usize>, String)>, DemoError> {
    gt.bundles
        .iter()
        .map(|b| {
            let positions = b
                .items
                .iter()
                .map(|id| {
                    session
                        .position_of(id)
                        .ok_or_else(|| DemoError::GtOutsideSession {
                            session: session.session_id.clone(),
                            item: id.clone(),
                        })
                })
                .collect::<Result<BTreeSet<usize>, _>>()?;
            Ok((positions, b.intent.clone()))
        })
        .collect()
}

/// Send `prompt`, parse the reply, and on failure send one format reminder.
pub(crate) fn ask<T>(
    client: &ChatClient,
    conv: &mut Conversation,
    prompts: &PromptRegistry,
    prompt: &str,
    tag: &str,
    warnings: &mut Vec<String>,
    parse: impl Fn(&str) -> Result<(T, Vec<String>), ParseError>,
) -> Result<T, DemoError> {
    let reply = client.send(conv, prompt, tag)?;
    let err = match parse(&reply) {
        Ok((v, w)) => {
            warnings.extend(w.into_iter().map(|w| format!("{tag}: {w}")));
            return Ok(v);
        }
        Err(e) => e,
    };
    log::warn!("step {tag}: {err}; sending a format reminder");
    let reminder = prompts.fixed(TemplateId::FormatReminder);
    let retry_tag = format!("{FORMAT_REMINDER_PREFIX}{tag}");
    let reply = client.send(conv, &reminder, &retry_tag)?;
    match parse(&reply) {
        Ok((v, w)) => {
            warnings.push(format!("{tag}: needed a format reminder"));
            warnings.extend(w.into_iter().map(|w| format!("{tag}: {w}")));
            Ok(v)
        }
        Err(source) => Err(DemoError::Parse {
            tag: tag.to_owned(),
            source,
        }),
    }
}

pub(crate) fn bundle_parser(len: usize) -> impl Fn(&str) -> Result<(BundleMap, Vec<String>), ParseError> {
    move |text| parse_bundle_answer(text, len).map(|p| (p.value, p.warnings))
}

pub(crate) fn intent_parser(text: &str) -> Result<(IntentMap, Vec<String>), ParseError> {
    parse_intent_answer(text).map(|p| (p.value, p.warnings))
}

/// Drives the demonstration state machine for one neighbor session.
pub struct DemoBuilder<'a> {
    generator: &'a ChatClient,
    panel: &'a RaterPanel,
    prompts: &'a PromptRegistry,
    loops: LoopConfig,
}

struct Run<'s> {
    session: &'s Session,
    titles: &'s [String],
    gt: Vec<(BTreeSet<usize>, String)>,
    conv: Conversation,
    bundles: BundleMap,
    intents: IntentMap,
    warnings: Vec<String>,
}

impl Run<'_> {
    fn gt_sets(&self) -> Vec<BTreeSet<usize>> {
        self.gt.iter().map(|(s, _)| s.clone()).collect()
    }
}

impl<'a> DemoBuilder<'a> {
    pub fn new(
        generator: &'a ChatClient,
        panel: &'a RaterPanel,
        prompts: &'a PromptRegistry,
        loops: LoopConfig,
    ) -> Self {
        Self {
            generator,
            panel,
            prompts,
            loops,
        }
    }

    /// `titles` are the raw titles of the session's items, in order.
    pub fn build(
        &self,
        session: &Session,
        titles: &[String],
        gt: Option<&GroundTruth>,
    ) -> Result<Demonstration, DemoError> {
        let gt = match gt {
            Some(g) if !g.bundles.is_empty() => g,
            _ => return Err(DemoError::NoGroundTruth(session.session_id.clone())),
        };
        let mut run = self.generate_initial(session, titles, gt)?;
        let self_correct = self.self_correct(&mut run)?;
        let (bundle_feedback, unresolved_bundles) = self.bundle_feedback_loop(&mut run)?;
        self.reinfer_intents(&mut run)?;
        let (intent_feedback, unresolved_intents, ratings) = self.intent_feedback_loop(&mut run)?;
        let rules = self.summarize_rules(&mut run)?;
        Ok(Demonstration {
            session_id: session.session_id.clone(),
            conversation: run.conv,
            bundles: run.bundles,
            intents: run.intents,
            rules,
            loops: self.loops,
            rounds: RoundCounts {
                self_correct,
                bundle_feedback,
                intent_feedback,
            },
            unresolved_bundle_signals: unresolved_bundles,
            unresolved_intent_signals: unresolved_intents,
            ratings,
            warnings: run.warnings,
        })
    }

    fn ask_bundles(&self, run: &mut Run, prompt: &str, tag: &str) -> Result<BundleMap, DemoError> {
        ask(
            self.generator,
            &mut run.conv,
            self.prompts,
            prompt,
            tag,
            &mut run.warnings,
            bundle_parser(run.session.len()),
        )
    }

    fn ask_intents(&self, run: &mut Run, prompt: &str, tag: &str) -> Result<IntentMap, DemoError> {
        ask(
            self.generator,
            &mut run.conv,
            self.prompts,
            prompt,
            tag,
            &mut run.warnings,
            intent_parser,
        )
    }

    fn generate_initial<'s>(
        &self,
        session: &'s Session,
        titles: &'s [String],
        gt: &GroundTruth,
    ) -> Result<Run<'s>, DemoError> {
        if session.is_empty() {
            return Err(DemoError::EmptySession(session.session_id.clone()));
        }
        let system = self.prompts.fixed(TemplateId::System);
        let mut run = Run {
            session,
            titles,
            gt: gt_positions(session, gt)?,
            conv: Conversation::new(Some(&session.session_id), Some(&system)),
            bundles: BundleMap::new(),
            intents: IntentMap::new(),
            warnings: Vec::new(),
        };
        let prompt = self.prompts.initial_bundles(titles)?;
        run.bundles = self.ask_bundles(&mut run, &prompt, TAG_INITIAL_BUNDLES)?;
        let prompt = self.prompts.fixed(TemplateId::InitialIntents);
        run.intents = self.ask_intents(&mut run, &prompt, TAG_INITIAL_INTENTS)?;
        Ok(run)
    }

    fn self_correct(&self, run: &mut Run) -> Result<u32, DemoError> {
        let mut rounds = 0;
        while rounds < self.loops.self_correct {
            let prompt = self.prompts.fixed(TemplateId::SelfCorrectBundles);
            let adjusted = self.ask_bundles(run, &prompt, TAG_SELF_CORRECT_BUNDLES)?;
            rounds += 1;
            let unchanged = adjusted.set_of_sets() == run.bundles.set_of_sets();
            run.bundles = adjusted;
            if unchanged {
                break;
            }
            let prompt = self.prompts.fixed(TemplateId::SelfCorrectIntents);
            run.intents = self.ask_intents(run, &prompt, TAG_SELF_CORRECT_INTENTS)?;
        }
        Ok(rounds)
    }

    fn bundle_feedback_loop(&self, run: &mut Run) -> Result<(u32, Vec<BundleSignal>), DemoError> {
        let gt = run.gt_sets();
        let mut signals = bundle_signals(&run.bundles, &gt);
        let mut rounds = 0;
        while !all_keep(&signals) && rounds < self.loops.bundle_feedback {
            let prompt = self.prompts.bundle_feedback(&bundle_tips(&signals))?;
            let tag = format!("{BUNDLE_FEEDBACK_PREFIX}{}", rounds + 1);
            run.bundles = self.ask_bundles(run, &prompt, &tag)?;
            rounds += 1;
            signals = bundle_signals(&run.bundles, &gt);
        }
        let unresolved = if all_keep(&signals) { Vec::new() } else { signals };
        Ok((rounds, unresolved))
    }

    fn reinfer_intents(&self, run: &mut Run) -> Result<(), DemoError> {
        let prompt = self.prompts.fixed(TemplateId::InitialIntents);
        run.intents = self.ask_intents(run, &prompt, TAG_REINFER_INTENTS)?;
        Ok(())
    }

    fn rate_all(
        &self,
        run: &mut Run,
        round: u32,
        ratings: &mut Vec<RatingRecord>,
    ) -> Result<Vec<IntentSignal>, DemoError> {
        let matching = match_bundles(&run.bundles, &run.gt_sets());
        let mut out = Vec::new();
        for (label, g) in matching.pairs {
            let Some(candidate) = run.intents.get(label).map(str::to_owned) else {
                run.warnings
                    .push(format!("intent feedback: bundle {label} has no intent; skipped"));
                continue;
            };
            let items = run.bundles.get(label).expect("matched label exists");
            let products: Vec<(usize, &str)> = items
                .iter()
                .map(|&p| (p, run.titles.get(p - 1).map_or("", String::as_str)))
                .collect();
            let scores = self.panel.rate_intent(
                self.prompts,
                &run.session.session_id,
                label,
                &products,
                &candidate,
                &run.gt[g].1,
            )?;
            out.extend(intent_signals(label, &scores));
            ratings.push(RatingRecord {
                round,
                label,
                scores,
            });
        }
        Ok(out)
    }

    /// With a zero budget no ratings are requested.
    fn intent_feedback_loop(
        &self,
        run: &mut Run,
    ) -> Result<(u32, Vec<IntentSignal>, Vec<RatingRecord>), DemoError> {
        let mut ratings = Vec::new();
        if self.loops.intent_feedback == 0 {
            return Ok((0, Vec::new(), ratings));
        }
        let mut rounds = 0;
        let mut signals = self.rate_all(run, 0, &mut ratings)?;
        while !signals.is_empty() && rounds < self.loops.intent_feedback {
            let prompt = self.prompts.intent_feedback(&intent_tips(&signals))?;
            let tag = format!("{INTENT_FEEDBACK_PREFIX}{}", rounds + 1);
            let regenerated = self.ask_intents(run, &prompt, &tag)?;
            // answers may cover only the bundles named in the tips
            for (l, t) in regenerated.0 {
                run.intents.insert(l, t);
            }
            rounds += 1;
            signals = self.rate_all(run, rounds, &mut ratings)?;
        }
        Ok((rounds, signals, ratings))
    }

    fn summarize_rules(&self, run: &mut Run) -> Result<String, DemoError> {
        let prompt = self.prompts.fixed(TemplateId::Rules);
        let reply = self.generator.send(&mut run.conv, &prompt, TAG_RULES)?;
        if !reply.trim().is_empty() {
            return Ok(reply);
        }
        let reminder = self.prompts.fixed(TemplateId::FormatReminder);
        let tag = format!("{FORMAT_REMINDER_PREFIX}{TAG_RULES}");
        let reply = self.generator.send(&mut run.conv, &reminder, &tag)?;
        if reply.trim().is_empty() {
            return Err(DemoError::EmptyRules);
        }
        Ok(reply)
    }
}
