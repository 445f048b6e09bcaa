//! Rendered prompts compared with checked-in copies. Run with
//! `UPDATE_GOLDEN=1` to rewrite them after an intended wording change.

use std::path::Path;

use dicl::demo::{bundle_tips, intent_tips, BundleSignal, BundleSignalType, IntentSignal};
use dicl::parse::Metric;
use dicl::prompts::{PromptRegistry, TemplateId};

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} drifted from {}", path.display());
}

const TITLES: [&str; 5] = [
    "Running Shoes for Women, Lightweight",
    "Moisture Wicking Athletic Socks (6 Pack)",
    "Yoga Leggings with Pocket",
    "Greek Yogurt, Plain",
    "Granola with Almonds",
];

#[test]
fn bundle_prompts() {
    let p = PromptRegistry::builtin();
    golden("initial_bundles", &p.initial_bundles(&TITLES).unwrap());
    golden("target_inference", &p.target_inference(&TITLES).unwrap());
    let tips = bundle_tips(&[
        BundleSignal {
            label: 1,
            signal_type: BundleSignalType::AppendRelated,
            matched_gt: Some(0),
        },
        BundleSignal {
            label: 2,
            signal_type: BundleSignalType::Keep,
            matched_gt: Some(1),
        },
    ]);
    golden("bundle_feedback", &p.bundle_feedback(&tips).unwrap());
}

#[test]
fn intent_prompts() {
    let p = PromptRegistry::builtin();
    let tips = intent_tips(&[
        IntentSignal {
            label: 1,
            metric: Metric::Naturalness,
        },
        IntentSignal {
            label: 1,
            metric: Metric::Motivation,
        },
    ]);
    golden("intent_feedback", &p.intent_feedback(&tips).unwrap());
    golden(
        "rater",
        &p.rater(&[(1, TITLES[0]), (2, TITLES[1]), (3, TITLES[2])], "getting ready for a run", "workout clothing gear")
            .unwrap(),
    );
}

#[test]
fn fixed_prompts() {
    let p = PromptRegistry::builtin();
    for id in [
        TemplateId::InitialIntents,
        TemplateId::SelfCorrectBundles,
        TemplateId::SelfCorrectIntents,
        TemplateId::Rules,
        TemplateId::System,
        TemplateId::FormatReminder,
    ] {
        golden(id.name(), &p.fixed(id));
    }
}
