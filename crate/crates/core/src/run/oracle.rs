use crate::dataset::Dataset;
use crate::demo::{gt_positions, RATE_TAG, TAG_RULES};
use crate::llm::{MockRule, MockScript};
use crate::parse::{BundleMap, IntentMap};

const BUNDLE_TAGS: [&str; 4] = [
    "initial_bundles",
    "self_correct_bundles",
    "bundle_feedback_round_*",
    "target_bundles",
];
const INTENT_TAGS: [&str; 5] = [
    "initial_intents",
    "self_correct_intents",
    "reinfer_intents",
    "intent_feedback_round_*",
    "target_intents",
];

pub const ORACLE_RULES: &str = "1. products with similar intents are grouped together in a bundle\n\
2. missing products can be appended to the bundles if they are related to the intent";

/// A mock script that answers every bundle prompt with the session's ground
/// truth bundles, every intent prompt with the ground truth intents, and
/// rates every candidate intent equal to the ground truth.
pub fn oracle_script(dataset: &Dataset) -> MockScript {
    let mut rules = Vec::new();
    for s in &dataset.sessions {
        let mut bundles = BundleMap::new();
        let mut intents = IntentMap::new();
        if let Some(gt) = dataset.ground_truth.get(&s.session_id) {
            let positions = gt_positions(s, gt).expect("validated dataset");
            for (i, (set, intent)) in positions.into_iter().enumerate() {
                bundles.insert(i as u32 + 1, set);
                intents.insert(i as u32 + 1, intent);
            }
        }
        let b = bundles.to_answer();
        let i = intents.to_answer();
        for t in BUNDLE_TAGS {
            rules.push(MockRule::new(t, &b).for_session(&s.session_id));
        }
        for t in INTENT_TAGS {
            rules.push(MockRule::new(t, &i).for_session(&s.session_id));
        }
    }
    let same = "['Naturalness':3, 'Coverage':3, 'Motivation':2]";
    rules.push(MockRule::new(
        RATE_TAG,
        &format!("{{'intent 1': {same}, 'intent 2': {same}}}"),
    ));
    rules.push(MockRule::new(TAG_RULES, ORACLE_RULES));
    MockScript {
        rules,
        fallback: None,
    }
}

/// A mock script that never repairs anything: each session gets a
/// single-product bundle drawn from its first ground truth bundle, and every
/// rating puts the candidate below the ground truth on all metrics.
pub fn stubborn_script(dataset: &Dataset) -> MockScript {
    let mut rules = Vec::new();
    for s in &dataset.sessions {
        let first = dataset
            .ground_truth
            .get(&s.session_id)
            .and_then(|gt| gt_positions(s, gt).ok())
            .and_then(|p| p.into_iter().next())
            .and_then(|(set, _)| set.into_iter().next())
            .unwrap_or(1);
        let b = format!("{{'bundle 1': ['product {first}']}}");
        for t in BUNDLE_TAGS {
            rules.push(MockRule::new(t, &b).for_session(&s.session_id));
        }
    }
    for t in INTENT_TAGS {
        rules.push(MockRule::new(t, "{'bundle 1': 'some products'}"));
    }
    rules.push(MockRule::new(
        RATE_TAG,
        "{'intent 1': ['Naturalness':1, 'Coverage':1, 'Motivation':1], 'intent 2': ['Naturalness':3, 'Coverage':3, 'Motivation':2]}",
    ));
    rules.push(MockRule::new(TAG_RULES, "no rules found"));
    MockScript {
        rules,
        fallback: None,
    }
}
