//! Seeded synthetic datasets with prescribed headline statistics.
//!
//! Used for split/scale tests and the runnable examples; titles are drawn
//! from small themed vocabularies so that retrieval has some signal.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, GroundTruth, GtBundle, Item, Session};

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub sessions: usize,
    pub bundles: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Headline counts of the Amazon Electronic bundle dataset.
    pub fn electronic() -> Self {
        Self {
            users: 888,
            items: 3499,
            sessions: 1145,
            bundles: 1750,
            seed: 7,
        }
    }
}

const THEMES: &[(&str, &[&str], &str)] = &[
    (
        "tablet",
        &["Galaxy Tab", "Tablet Case", "Screen Protector", "Stylus Pen", "Tablet Stand", "Keyboard Cover"],
        "tablet protection setup",
    ),
    (
        "streaming",
        &["Streaming Box", "HDMI Cable", "Remote Control", "Media Player", "Antenna", "Sound Bar"],
        "home streaming upgrade",
    ),
    (
        "computer",
        &["Graphics Card", "Power Supply", "CPU Cooler", "Memory Kit", "SSD Drive", "PC Case"],
        "assembling a gaming computer",
    ),
    (
        "camera",
        &["DSLR Camera", "Camera Lens", "Tripod", "Memory Card", "Camera Bag", "Lens Filter"],
        "travel photography kit",
    ),
    (
        "audio",
        &["Headphones", "Headphone Amp", "Audio Cable", "Earbud Tips", "Bluetooth Adapter", "Carrying Pouch"],
        "portable music listening",
    ),
];

const BRANDS: &[&str] = &["Acme", "Zen", "Nova", "Orbit", "Pixel", "Vertex", "Lumen"];

/// Generates a dataset whose `stats()` equal the requested counts exactly.
/// Panics if `users > sessions`.
pub fn generate(spec: SyntheticSpec) -> Dataset {
    assert!(spec.users <= spec.sessions, "more users than sessions");
    assert!(spec.items >= 10, "too few items");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut catalog = BTreeMap::new();
    let mut by_theme: Vec<Vec<String>> = vec![Vec::new(); THEMES.len()];
    for n in 0..spec.items {
        let theme = n % THEMES.len();
        let (_, nouns, _) = THEMES[theme];
        let id = format!("i{n:05}");
        let title = format!(
            "{} {} {}",
            BRANDS[rng.gen_range(0..BRANDS.len())],
            nouns[rng.gen_range(0..nouns.len())],
            n
        );
        catalog.insert(
            id.clone(),
            Item {
                item_id: id.clone(),
                raw_title: title,
            },
        );
        by_theme[theme].push(id);
    }

    // bundles per session: everyone gets floor, the first `extra` get one more
    let base = spec.bundles / spec.sessions.max(1);
    let extra = spec.bundles % spec.sessions.max(1);

    let mut sessions = Vec::with_capacity(spec.sessions);
    let mut ground_truth = BTreeMap::new();
    let mut order: Vec<usize> = (0..spec.sessions).collect();
    order.shuffle(&mut rng);
    for (n, &slot) in order.iter().enumerate() {
        let session_id = format!("s{slot:05}");
        let user_id = if n < spec.users {
            format!("u{n:04}")
        } else {
            format!("u{:04}", rng.gen_range(0..spec.users))
        };
        let n_bundles = base + usize::from(slot < extra);
        let mut themes: Vec<usize> = (0..THEMES.len()).collect();
        themes.shuffle(&mut rng);

        let mut items: Vec<String> = Vec::new();
        let mut bundles = Vec::new();
        for b in 0..n_bundles {
            let theme = themes[b % themes.len()];
            let pool = &by_theme[theme];
            let size = rng.gen_range(2..=3);
            let mut set = BTreeSet::new();
            while set.len() < size {
                let cand = &pool[rng.gen_range(0..pool.len())];
                if !items.contains(cand) {
                    set.insert(cand.clone());
                }
            }
            items.extend(set.iter().cloned());
            bundles.push(GtBundle {
                items: set,
                intent: THEMES[theme].2.to_string(),
            });
        }
        // a noise item or two that belong to no bundle
        for _ in 0..rng.gen_range(0..=2) {
            let theme = rng.gen_range(0..THEMES.len());
            let pool = &by_theme[theme];
            let cand = pool[rng.gen_range(0..pool.len())].clone();
            if !items.contains(&cand) {
                items.push(cand);
            }
        }
        if items.is_empty() {
            items.push(by_theme[0][0].clone());
        }
        items.shuffle(&mut rng);
        let timestamp = 1_350_000_000 + rng.gen_range(0..100_000_000i64);
        if !bundles.is_empty() {
            ground_truth.insert(
                session_id.clone(),
                GroundTruth {
                    session_id: session_id.clone(),
                    bundles,
                },
            );
        }
        sessions.push(Session {
            session_id,
            user_id,
            timestamp,
            item_ids: items,
        });
    }
    sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));

    Dataset {
        sessions,
        catalog,
        ground_truth,
    }
}
